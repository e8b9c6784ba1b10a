#include "semshift/lift.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "semshift/rng.hpp"

namespace semshift {

ViewMaskSet::ViewMaskSet(int id, int w, int h) : view_id(id), width(w), height(h) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("ViewMaskSet: raster must be nonempty");
  for (auto& m : masks) m.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
}

std::size_t AlignedPointMap::association_count() const {
  std::size_t n = 0;
  for (const auto& s : support) n += s.size();
  return n;
}

std::array<std::uint8_t, 4> GroupAssignment::one_hot(std::size_t i) const {
  std::array<std::uint8_t, 4> out{0, 0, 0, 0};
  out[static_cast<std::size_t>(groups.at(i))] = 1;
  return out;
}

GroupAssignment assign_groups(std::span<const ViewMaskSet> masks, const AlignedPointMap& pmap,
                              std::size_t n_points) {
  if (pmap.support.size() > n_points)
    throw std::invalid_argument("assign_groups: point map references more points than given");
  std::unordered_map<int, const ViewMaskSet*> by_id;
  for (const auto& m : masks) by_id[m.view_id] = &m;

  GroupAssignment out;
  out.groups.assign(n_points, SemanticGroup::Other);
  for (std::size_t i = 0; i < pmap.support.size(); ++i) {
    std::array<int, 3> votes{0, 0, 0};
    for (const auto& px : pmap.support[i]) {
      auto it = by_id.find(px.view_id);
      if (it == by_id.end())
        throw std::invalid_argument("assign_groups: unknown view_id " + std::to_string(px.view_id));
      const ViewMaskSet& view = *it->second;
      if (!view.contains(px.u, px.v))
        throw std::invalid_argument("assign_groups: pixel out of raster bounds in view " +
                                    std::to_string(px.view_id));
      const std::size_t off = view.offset(px.u, px.v);
      int hits = 0;
      for (std::size_t k = 0; k < 3; ++k) {
        if (view.masks[k][off]) {
          ++votes[k];
          ++hits;
        }
      }
      if (hits > 1)
        throw std::invalid_argument("assign_groups: masks overlap at a referenced pixel");
    }
    // Tie priority: Opening, then Furniture, then Wall.
    constexpr std::array<SemanticGroup, 3> priority{SemanticGroup::Opening,
                                                    SemanticGroup::Furniture, SemanticGroup::Wall};
    int best = 0;
    for (auto g : priority) {
      const int v = votes[static_cast<std::size_t>(foreground_index(g))];
      if (v > best) {
        best = v;
        out.groups[i] = g;
      }
    }
  }
  return out;
}

SemanticColor color_of(SemanticGroup g) {
  switch (g) {
    case SemanticGroup::Furniture: return {1.0, 0.0, 0.0};
    case SemanticGroup::Wall: return {0.0, 1.0, 0.0};
    case SemanticGroup::Opening: return {0.0, 0.0, 1.0};
    case SemanticGroup::Other: break;
  }
  return {0.0, 0.0, 0.0};
}

std::vector<SemanticColor> encode_rgbb(const GroupAssignment& assign) {
  std::vector<SemanticColor> out;
  out.reserve(assign.groups.size());
  for (auto g : assign.groups) out.push_back(color_of(g));
  return out;
}

SemanticGroup group_of_color(const SemanticColor& c) {
  const std::array<double, 3> ch{c.r, c.g, c.b};
  std::size_t k = 0;
  for (std::size_t j = 1; j < 3; ++j)
    if (ch[j] > ch[k]) k = j;
  if (!(ch[k] >= 0.5)) return SemanticGroup::Other;
  return kForegroundGroups[k];
}

SemanticPointCloud concat_features(SemanticPointCloud cloud, std::span<const SemanticColor> colors) {
  if (colors.size() != cloud.points.size())
    throw std::invalid_argument("concat_features: " + std::to_string(colors.size()) +
                                " colors for " + std::to_string(cloud.points.size()) + " points");
  for (std::size_t i = 0; i < colors.size(); ++i) cloud.points[i].color = colors[i];
  return cloud;
}

Eigen::MatrixXd point_attributes(const SemanticPointCloud& cloud) {
  const auto n = static_cast<Eigen::Index>(cloud.points.size());
  const int d = cloud.d_raw;
  Eigen::MatrixXd out(n, d + 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = cloud.points[static_cast<std::size_t>(i)];
    if (static_cast<int>(p.raw.size()) != d)
      throw std::invalid_argument("point_attributes: raw width differs from d_raw");
    for (int j = 0; j < d; ++j) out(i, j) = p.raw[static_cast<std::size_t>(j)];
    out(i, d) = p.color.r;
    out(i, d + 1) = p.color.g;
    out(i, d + 2) = p.color.b;
  }
  return out;
}

SemanticPointCloud make_target_only(SemanticPointCloud cloud, int instance_id) {
  std::size_t hits = 0;
  for (auto& p : cloud.points) {
    const bool target = p.instance_id && *p.instance_id == instance_id;
    p.color = target ? color_of(SemanticGroup::Furniture) : SemanticColor{};
    hits += target ? 1 : 0;
  }
  if (hits == 0)
    throw std::invalid_argument("make_target_only: instance " + std::to_string(instance_id) +
                                " has no points");
  return cloud;
}

SemanticPointCloud scale_intensity(SemanticPointCloud cloud, double s) {
  if (!(s >= 0.0 && s <= 1.0))
    throw std::invalid_argument("scale_intensity: s must lie in [0, 1]");
  for (auto& p : cloud.points) p.color = {p.color.r * s, p.color.g * s, p.color.b * s};
  return cloud;
}

SemanticPointCloud random_color_control(SemanticPointCloud cloud, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : cloud.points) p.color = color_of(static_cast<SemanticGroup>(rng.index(4)));
  return cloud;
}

std::array<SemanticGroup, 4> color_derangement(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> perm{0, 1, 2, 3};
  for (;;) {
    rng.shuffle(perm);
    bool fixed_point = false;
    for (int g = 0; g < 4; ++g) fixed_point = fixed_point || perm[static_cast<std::size_t>(g)] == g;
    if (!fixed_point) break;
  }
  std::array<SemanticGroup, 4> out;
  for (std::size_t g = 0; g < 4; ++g) out[g] = static_cast<SemanticGroup>(perm[g]);
  return out;
}

SemanticPointCloud perturb_color_map(SemanticPointCloud cloud, std::uint64_t seed) {
  const auto perm = color_derangement(seed);
  for (auto& p : cloud.points) p.color = color_of(perm[static_cast<std::size_t>(p.gt_group)]);
  return cloud;
}

double lift_fidelity(const SemanticPointCloud& cloud, const AlignedPointMap* pmap) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (pmap && (i >= pmap->support.size() || pmap->support[i].empty())) continue;
    ++total;
    if (group_of_color(cloud.points[i].color) == cloud.points[i].gt_group) ++correct;
  }
  return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace semshift
