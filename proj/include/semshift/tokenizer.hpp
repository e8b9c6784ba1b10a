#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "semshift/core.hpp"

namespace semshift {

struct EncoderConfig {
  double voxel_size = 0.05;
  int channels = 96;  // C, must be divisible by 3
  int hidden = 64;
  std::uint64_t seed = 17;
  int d_raw = 3;
  double position_scale = 8.0;  // voxel centers are divided by this before encoding

  void validate() const;
  int input_width() const { return d_raw + 6; }
};

struct GridCoord {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

struct GridCoordHash {
  std::size_t operator()(const GridCoord& c) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(c.x) * 0x9e3779b97f4a7c15ULL;
    h ^= static_cast<std::uint64_t>(c.y) * 0xc2b2ae3d27d4eb4fULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(c.z) * 0x165667b19e3779f9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

struct VoxelGrid {
  double voxel_size = 0.0;
  Vec3 origin;
  std::unordered_map<GridCoord, std::vector<std::size_t>, GridCoordHash> cells;
};

struct OrderedVoxel {
  GridCoord coord;
  std::uint64_t morton = 0;
};

/// Per-axis limit on grid coordinates accepted by the serializer.
inline constexpr std::int64_t kMaxGridCoord = std::int64_t{1} << 20;

/// 21-bit-per-axis interleave, x in the lowest bit of each triple.
std::uint64_t morton_encode(std::uint32_t x, std::uint32_t y, std::uint32_t z);

/// Floors (pos - origin) / voxel_size with origin at the componentwise minimum.
VoxelGrid voxelize(const SemanticPointCloud& cloud, const EncoderConfig& cfg);

/// Occupied cells sorted by Morton code. Throws std::out_of_range on coordinate overflow.
std::vector<OrderedVoxel> serialize_order(const VoxelGrid& grid);

struct TokenSequence {
  Eigen::MatrixXd tokens;  // N x C
  std::vector<Vec3> positions;
  std::vector<std::uint64_t> morton;
  std::vector<GridCoord> coords;
  double voxel_size = 0.0;

  Eigen::Index size() const { return tokens.rows(); }
  Eigen::Index channels() const { return tokens.cols(); }
};

/// Frozen, seeded random-feature point encoder: voxel mean pooling followed by a
/// two-layer tanh map into R^C. Weights never change after construction.
class PointEncoder {
 public:
  explicit PointEncoder(EncoderConfig cfg);

  const EncoderConfig& config() const { return cfg_; }

  /// Throws std::invalid_argument on an empty cloud or an attribute width mismatch.
  TokenSequence encode(const SemanticPointCloud& cloud) const;

  /// Token map for one pooled input row; exposed for tests.
  Eigen::VectorXd project(const Eigen::VectorXd& pooled) const;

 private:
  EncoderConfig cfg_;
  Eigen::MatrixXd w1_;  // hidden x in
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;  // C x hidden
};

/// Convenience wrapper building a PointEncoder from cfg.
TokenSequence encode_tokens(const SemanticPointCloud& cloud, const EncoderConfig& cfg);

/// Points whose (binarized) color matches group.
SemanticPointCloud filter_by_color(const SemanticPointCloud& cloud, SemanticGroup group);

/// Mean token of a class-filtered forward pass; exactly zero when no point carries the color.
Eigen::VectorXd class_filtered_prototype(const SemanticPointCloud& cloud, SemanticGroup group,
                                         const PointEncoder& encoder, int* forwards = nullptr);
Eigen::VectorXd class_filtered_prototype(const SemanticPointCloud& cloud, SemanticGroup group,
                                         const EncoderConfig& cfg);

/// Full forward plus the three class-filtered forwards of one scene.
struct SceneEncoding {
  TokenSequence tokens;
  Eigen::MatrixXd prototypes;      // 3 x C in foreground order
  std::array<bool, 3> present{};   // whether each filtered set was nonempty
  int encoder_forwards = 0;
};

SceneEncoding encode_scene(const SemanticPointCloud& cloud, const PointEncoder& encoder);

}  // namespace semshift
