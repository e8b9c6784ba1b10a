#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "semshift/core.hpp"

namespace semshift {

/// Three mutually exclusive binary rasters (furniture, wall, opening) for one view.
struct ViewMaskSet {
  int view_id = 0;
  int width = 0;
  int height = 0;
  std::array<std::vector<std::uint8_t>, 3> masks;  // row-major, indexed by foreground_index

  ViewMaskSet() = default;
  ViewMaskSet(int id, int w, int h);

  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  std::size_t offset(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(u);
  }
  std::uint8_t at(SemanticGroup g, int u, int v) const {
    return masks[static_cast<std::size_t>(foreground_index(g))][offset(u, v)];
  }
  void set(SemanticGroup g, int u, int v, std::uint8_t value = 1) {
    masks[static_cast<std::size_t>(foreground_index(g))][offset(u, v)] = value;
  }
  /// Clears every mask at (u, v).
  void clear(int u, int v) {
    for (auto& m : masks) m[offset(u, v)] = 0;
  }

  friend bool operator==(const ViewMaskSet&, const ViewMaskSet&) = default;
};

struct PixelRef {
  int view_id = 0;
  int u = 0;
  int v = 0;

  friend bool operator==(const PixelRef&, const PixelRef&) = default;
};

/// Aligned point-map pixels per point; a point may have none.
struct AlignedPointMap {
  std::vector<std::vector<PixelRef>> support;

  std::size_t association_count() const;
  friend bool operator==(const AlignedPointMap&, const AlignedPointMap&) = default;
};

/// Hard 4-way assignment; storing the winning group keeps the one-hot exact by construction.
struct GroupAssignment {
  std::vector<SemanticGroup> groups;

  std::array<std::uint8_t, 4> one_hot(std::size_t i) const;
};

/// Majority vote of foreground mask support over each point's aligned pixels.
/// Points without foreground support become Other; ties resolve Opening > Furniture > Wall.
/// Throws std::invalid_argument on unknown views, out-of-raster pixels, or
/// non-exclusive masks at a referenced pixel.
GroupAssignment assign_groups(std::span<const ViewMaskSet> masks, const AlignedPointMap& pmap,
                              std::size_t n_points);

SemanticColor color_of(SemanticGroup g);

/// Red for furniture, green for walls, blue for openings, black for everything else.
std::vector<SemanticColor> encode_rgbb(const GroupAssignment& assign);

/// Group a (possibly intensity-scaled) color stands for: the dominant channel wins when it
/// reaches 0.5, otherwise the color counts as black.
SemanticGroup group_of_color(const SemanticColor& c);

/// Replaces per-point colors; the attribute vector of point i becomes [raw_i; color_i].
SemanticPointCloud concat_features(SemanticPointCloud cloud, std::span<const SemanticColor> colors);

/// N x (d_raw + 3) attribute matrix [raw; color].
Eigen::MatrixXd point_attributes(const SemanticPointCloud& cloud);

/// Only the target instance stays colored (red); every other point goes black.
SemanticPointCloud make_target_only(SemanticPointCloud cloud, int instance_id);

/// Multiplies every color channel by s in [0, 1].
SemanticPointCloud scale_intensity(SemanticPointCloud cloud, double s);

/// Each point independently gets one of the four pure colors.
SemanticPointCloud random_color_control(SemanticPointCloud cloud, std::uint64_t seed);

/// A seeded derangement of the group-to-color mapping: perm[g] is the group whose color g gets.
std::array<SemanticGroup, 4> color_derangement(std::uint64_t seed);

/// Recolors points by their oracle group through a seeded derangement.
SemanticPointCloud perturb_color_map(SemanticPointCloud cloud, std::uint64_t seed);

/// Fraction of points whose color decodes to their oracle group, optionally restricted to
/// points with a nonempty support set.
double lift_fidelity(const SemanticPointCloud& cloud, const AlignedPointMap* pmap = nullptr);

}  // namespace semshift
