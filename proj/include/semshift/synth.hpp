#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "semshift/core.hpp"
#include "semshift/lift.hpp"

namespace semshift::synth {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct GenParams {
  std::uint64_t seed = 0;
  Range room_width{3.5, 5.5};
  Range room_depth{3.5, 5.5};
  Range room_height{2.4, 2.8};
  double wall_thickness = kDefaultWallThickness;

  IntRange doors{1, 2};
  IntRange windows{0, 2};
  Range door_width{0.8, 1.0};
  Range door_height{2.0, 2.2};
  Range window_width{0.6, 1.4};
  Range window_height{0.8, 1.2};
  Range window_sill{0.8, 1.0};
  double opening_margin = 0.2;  // to wall ends and between openings

  IntRange furniture{2, 4};
  Range furniture_footprint{0.4, 1.2};
  Range furniture_height{0.4, 1.0};
  double clearance = 0.3;
  int max_attempts = 1000;

  double density = 110.0;  // points per square meter
  double noise_sigma = 0.005;
  bool sample_floor = true;

  int cameras = 4;
  double focal = 280.0;
  int raster_width = 640;
  int raster_height = 480;
  double camera_height = 1.6;
  double camera_inset = 0.3;

  void validate() const;
};

class InfeasibleParams : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pinhole camera; image v grows downward.
struct Camera {
  int view_id = 0;
  Vec3 position;
  Vec3 forward;  // unit
  Vec3 right;    // unit
  Vec3 down;     // unit
  double focal = 280.0;
  int width = 640;
  int height = 480;

  /// Camera looking from `position` toward `target`, with world +z as up.
  static Camera look_at(int view_id, Vec3 position, Vec3 target, double focal, int width,
                        int height);

  struct Projection {
    int u = 0;
    int v = 0;
    double depth = 0.0;
  };
  /// Pixel of a world point, or nothing when behind the camera or off the raster.
  std::optional<Projection> project(const Vec3& p) const;
};

struct SceneBundle {
  GenParams params;
  StructuredScene scene;
  SemanticPointCloud cloud;  // colors hold the lifted RGBB code
  std::vector<Camera> cameras;
  std::vector<ViewMaskSet> views;
  AlignedPointMap pmap;
};

/// Walls, openings and furniture boxes of one room.
StructuredScene generate_layout(const GenParams& params);

/// Labeled surface samples of a layout. Colors are left black.
SemanticPointCloud sample_points(const StructuredScene& scene, const GenParams& params);

std::vector<Camera> default_cameras(const StructuredScene& scene, const GenParams& params);

struct Projected {
  std::vector<ViewMaskSet> views;
  AlignedPointMap pmap;
};

/// Z-buffered projection at one point per pixel; each pixel's mask comes from the winning
/// point's oracle group (foreground only).
Projected project_masks(const SemanticPointCloud& cloud, const std::vector<Camera>& cameras);

/// Drops each pixel association independently with probability drop_fraction.
Projected degrade_views(const Projected& in, double drop_fraction, std::uint64_t seed);

/// Full bundle: layout, points, masks, and the lifted colors.
SceneBundle generate_scene(const GenParams& params);

}  // namespace semshift::synth
