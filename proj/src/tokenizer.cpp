#include "semshift/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "semshift/lift.hpp"
#include "semshift/rng.hpp"

namespace semshift {

void EncoderConfig::validate() const {
  if (!(voxel_size > 0.0)) throw std::invalid_argument("EncoderConfig: voxel_size must be > 0");
  if (channels <= 0 || channels % 3 != 0)
    throw std::invalid_argument("EncoderConfig: channels must be a positive multiple of 3");
  if (hidden <= 0) throw std::invalid_argument("EncoderConfig: hidden must be > 0");
  if (d_raw < 0) throw std::invalid_argument("EncoderConfig: d_raw must be >= 0");
  if (!(position_scale > 0.0))
    throw std::invalid_argument("EncoderConfig: position_scale must be > 0");
}

namespace {

std::uint64_t spread_bits(std::uint32_t a) {
  std::uint64_t x = a & 0x1fffff;
  x = (x | x << 32) & 0x1f00000000ffffULL;
  x = (x | x << 16) & 0x1f0000ff0000ffULL;
  x = (x | x << 8) & 0x100f00f00f00f00fULL;
  x = (x | x << 4) & 0x10c30c30c30c30c3ULL;
  x = (x | x << 2) & 0x1249249249249249ULL;
  return x;
}

}  // namespace

std::uint64_t morton_encode(std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  return spread_bits(x) | (spread_bits(y) << 1) | (spread_bits(z) << 2);
}

VoxelGrid voxelize(const SemanticPointCloud& cloud, const EncoderConfig& cfg) {
  cfg.validate();
  if (cloud.empty()) throw std::invalid_argument("voxelize: empty cloud");
  Vec3 origin = cloud.points.front().pos;
  for (const auto& p : cloud.points) {
    if (!p.pos.finite()) throw std::invalid_argument("voxelize: non-finite position");
    origin = {std::min(origin.x, p.pos.x), std::min(origin.y, p.pos.y),
              std::min(origin.z, p.pos.z)};
  }
  VoxelGrid grid;
  grid.voxel_size = cfg.voxel_size;
  grid.origin = origin;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3 rel = cloud.points[i].pos - origin;
    const GridCoord c{static_cast<std::int64_t>(std::floor(rel.x / cfg.voxel_size)),
                      static_cast<std::int64_t>(std::floor(rel.y / cfg.voxel_size)),
                      static_cast<std::int64_t>(std::floor(rel.z / cfg.voxel_size))};
    grid.cells[c].push_back(i);
  }
  return grid;
}

std::vector<OrderedVoxel> serialize_order(const VoxelGrid& grid) {
  std::vector<OrderedVoxel> out;
  out.reserve(grid.cells.size());
  for (const auto& [c, members] : grid.cells) {
    for (auto v : {c.x, c.y, c.z}) {
      if (v < 0 || v >= kMaxGridCoord)
        throw std::out_of_range("serialize_order: grid coordinate " + std::to_string(v) +
                                " outside [0, 2^20)");
    }
    out.push_back({c, morton_encode(static_cast<std::uint32_t>(c.x),
                                    static_cast<std::uint32_t>(c.y),
                                    static_cast<std::uint32_t>(c.z))});
  }
  std::sort(out.begin(), out.end(),
            [](const OrderedVoxel& a, const OrderedVoxel& b) { return a.morton < b.morton; });
  return out;
}

PointEncoder::PointEncoder(EncoderConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(mix_seed(cfg_.seed, 0x656e63));
  const int in = cfg_.input_width();
  constexpr double kGain = 1.5;
  w1_.resize(cfg_.hidden, in);
  b1_.resize(cfg_.hidden);
  w2_.resize(cfg_.channels, cfg_.hidden);
  const double s1 = kGain / std::sqrt(static_cast<double>(in));
  for (Eigen::Index i = 0; i < w1_.size(); ++i) w1_.data()[i] = s1 * rng.normal();
  for (Eigen::Index i = 0; i < b1_.size(); ++i) b1_[i] = 0.5 * rng.normal();
  const double s2 = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden));
  for (Eigen::Index i = 0; i < w2_.size(); ++i) w2_.data()[i] = s2 * rng.normal();
}

Eigen::VectorXd PointEncoder::project(const Eigen::VectorXd& pooled) const {
  return w2_ * (w1_ * pooled + b1_).array().tanh().matrix();
}

TokenSequence PointEncoder::encode(const SemanticPointCloud& cloud) const {
  if (cloud.empty()) throw std::invalid_argument("encode_tokens: empty cloud");
  if (cloud.d_raw != cfg_.d_raw)
    throw std::invalid_argument("encode_tokens: attribute width " + std::to_string(cloud.d_raw + 3) +
                                " does not match encoder width " + std::to_string(cfg_.d_raw + 3));
  const Eigen::MatrixXd attrs = point_attributes(cloud);
  const VoxelGrid grid = voxelize(cloud, cfg_);
  const auto order = serialize_order(grid);

  const auto n = static_cast<Eigen::Index>(order.size());
  const int width = cfg_.d_raw + 3;
  Eigen::MatrixXd pooled(n, cfg_.input_width());
  TokenSequence out;
  out.voxel_size = cfg_.voxel_size;
  out.positions.reserve(order.size());
  out.morton.reserve(order.size());
  out.coords.reserve(order.size());

  std::vector<std::vector<double>> rows;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& voxel = order[static_cast<std::size_t>(t)];
    const auto& members = grid.cells.at(voxel.coord);
    // Summing in sorted row order makes the mean independent of input point order.
    rows.assign(members.size(), std::vector<double>(static_cast<std::size_t>(width)));
    for (std::size_t m = 0; m < members.size(); ++m)
      for (int j = 0; j < width; ++j)
        rows[m][static_cast<std::size_t>(j)] = attrs(static_cast<Eigen::Index>(members[m]), j);
    std::sort(rows.begin(), rows.end());
    for (int j = 0; j < width; ++j) {
      double acc = 0.0;
      for (const auto& r : rows) acc += r[static_cast<std::size_t>(j)];
      pooled(t, j) = acc / static_cast<double>(rows.size());
    }
    const double vs = cfg_.voxel_size;
    const Vec3 center{grid.origin.x + (static_cast<double>(voxel.coord.x) + 0.5) * vs,
                      grid.origin.y + (static_cast<double>(voxel.coord.y) + 0.5) * vs,
                      grid.origin.z + (static_cast<double>(voxel.coord.z) + 0.5) * vs};
    pooled(t, width) = center.x / cfg_.position_scale;
    pooled(t, width + 1) = center.y / cfg_.position_scale;
    pooled(t, width + 2) = center.z / cfg_.position_scale;
    out.positions.push_back(center);
    out.morton.push_back(voxel.morton);
    out.coords.push_back(voxel.coord);
  }
  Eigen::MatrixXd hidden = (pooled * w1_.transpose()).rowwise() + b1_.transpose();
  hidden = hidden.array().tanh().matrix();
  out.tokens = hidden * w2_.transpose();
  return out;
}

TokenSequence encode_tokens(const SemanticPointCloud& cloud, const EncoderConfig& cfg) {
  return PointEncoder(cfg).encode(cloud);
}

SemanticPointCloud filter_by_color(const SemanticPointCloud& cloud, SemanticGroup group) {
  SemanticPointCloud out;
  out.d_raw = cloud.d_raw;
  for (const auto& p : cloud.points)
    if (group_of_color(p.color) == group) out.points.push_back(p);
  return out;
}

Eigen::VectorXd class_filtered_prototype(const SemanticPointCloud& cloud, SemanticGroup group,
                                         const PointEncoder& encoder, int* forwards) {
  if (!is_foreground(group))
    throw std::invalid_argument("class_filtered_prototype: group must be foreground");
  const SemanticPointCloud filtered = filter_by_color(cloud, group);
  if (filtered.empty()) return Eigen::VectorXd::Zero(encoder.config().channels);
  if (forwards) ++*forwards;
  return encoder.encode(filtered).tokens.colwise().mean().transpose();
}

Eigen::VectorXd class_filtered_prototype(const SemanticPointCloud& cloud, SemanticGroup group,
                                         const EncoderConfig& cfg) {
  return class_filtered_prototype(cloud, group, PointEncoder(cfg));
}

SceneEncoding encode_scene(const SemanticPointCloud& cloud, const PointEncoder& encoder) {
  SceneEncoding out;
  out.tokens = encoder.encode(cloud);
  out.encoder_forwards = 1;
  out.prototypes.resize(3, encoder.config().channels);
  for (std::size_t k = 0; k < 3; ++k) {
    const int before = out.encoder_forwards;
    out.prototypes.row(static_cast<Eigen::Index>(k)) =
        class_filtered_prototype(cloud, kForegroundGroups[k], encoder, &out.encoder_forwards)
            .transpose();
    out.present[k] = out.encoder_forwards > before;
  }
  return out;
}

}  // namespace semshift
