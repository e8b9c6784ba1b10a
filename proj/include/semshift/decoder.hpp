#pragma once

#include <span>
#include <vector>

#include "semshift/core.hpp"
#include "semshift/shift.hpp"
#include "semshift/tokenizer.hpp"

namespace semshift {

struct DecoderConfig {
  double route_threshold = 0.5;
  int min_cluster = 4;           // tokens
  int cluster_link_radius = 2;   // voxels, Chebyshev
  double voxel_size = 0.05;
  double wall_inlier_tol = 0.075;
  double door_floor_tol = 0.2;
  /// Wall candidates shorter (z-range) than this are consumed but not emitted.
  double min_wall_height = 0.5;

  void validate() const;
};

/// Token label: foreground group when the dominant routing weight reaches the
/// threshold, Other otherwise.
std::vector<SemanticGroup> label_tokens(const RoutingWeights& w, const DecoderConfig& cfg);

/// Connected components of grid cells under the Chebyshev link radius. Components are
/// ordered by their smallest member index; members are ascending.
std::vector<std::vector<std::size_t>> voxel_components(std::span<const GridCoord> cells,
                                                       int link_radius);

/// Plan-view PCA box. `padding` is added to each side of every extent.
/// Throws std::invalid_argument for fewer than 4 points or collinear plan views.
OrientedBox fit_oriented_box(std::span<const Vec3> points, double padding = 0.025);

std::vector<WallSegment> fit_wall_segments(std::span<const Vec3> points, const DecoderConfig& cfg);

/// Openings are grouped by nearest wall; ones with no wall in reach are dropped.
std::vector<Opening> fit_openings(std::span<const Vec3> points, std::span<const WallSegment> walls,
                                  const DecoderConfig& cfg);

StructuredScene decode(const TokenSequence& tokens, const RoutingWeights& w,
                       const DecoderConfig& cfg);

}  // namespace semshift
