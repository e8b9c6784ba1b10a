#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace semshift {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

/// Coarse semantic partition. Furniture, Wall and Opening are foreground and
/// always appear in that order in any 3-vector over groups.
enum class SemanticGroup : std::uint8_t { Furniture = 0, Wall = 1, Opening = 2, Other = 3 };

inline constexpr std::array<SemanticGroup, 3> kForegroundGroups{
    SemanticGroup::Furniture, SemanticGroup::Wall, SemanticGroup::Opening};

inline constexpr bool is_foreground(SemanticGroup g) { return g != SemanticGroup::Other; }

/// Index into a foreground 3-vector. Throws for Other.
int foreground_index(SemanticGroup g);

std::string_view group_name(SemanticGroup g);
std::optional<SemanticGroup> group_from_name(std::string_view name);

struct SemanticColor {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  friend bool operator==(const SemanticColor&, const SemanticColor&) = default;
};

struct SemanticPoint {
  Vec3 pos;
  std::vector<double> raw;
  SemanticColor color;
  SemanticGroup gt_group = SemanticGroup::Other;  // oracle label, evaluation only
  std::optional<int> instance_id;                 // oracle furniture instance

  friend bool operator==(const SemanticPoint&, const SemanticPoint&) = default;
};

struct SemanticPointCloud {
  std::vector<SemanticPoint> points;
  int d_raw = 3;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  friend bool operator==(const SemanticPointCloud&, const SemanticPointCloud&) = default;
};

inline constexpr double kDefaultWallThickness = 0.10;

/// Floor-plane segment; a and b share the floor height z.
struct WallSegment {
  Vec3 a;
  Vec3 b;
  double height = 0.0;
  double thickness = kDefaultWallThickness;

  double length() const { return (b - a).norm(); }
  friend bool operator==(const WallSegment&, const WallSegment&) = default;
};

enum class OpeningKind : std::uint8_t { Door, Window };

struct Opening {
  OpeningKind kind = OpeningKind::Door;
  int wall_index = 0;
  Vec3 center;
  double width = 0.0;
  double height = 0.0;

  friend bool operator==(const Opening&, const Opening&) = default;
};

/// Gravity-aligned box, rotated by yaw about +z. Canonical yaw lies in [-pi/2, pi/2).
struct OrientedBox {
  std::string category = "furniture";
  Vec3 center;
  double yaw = 0.0;
  Vec3 size;  // (sx, sy, sz) along the box's local axes

  double volume() const { return size.x * size.y * size.z; }
  friend bool operator==(const OrientedBox&, const OrientedBox&) = default;
};

struct StructuredScene {
  std::vector<WallSegment> walls;
  std::vector<Opening> openings;
  std::vector<OrientedBox> boxes;

  bool empty() const { return walls.empty() && openings.empty() && boxes.empty(); }
  friend bool operator==(const StructuredScene&, const StructuredScene&) = default;
};

struct Violation {
  std::string kind;     // e.g. "dangling wall reference"
  std::string element;  // e.g. "opening 2"

  std::string message() const { return kind + " (" + element + ")"; }
};

/// Every violated scene invariant; an empty result means the scene is valid.
std::vector<Violation> validate_scene(const StructuredScene& scene);

/// Reduces yaw into [-pi/2, pi/2) using the half-turn symmetry of the footprint.
/// Throws std::invalid_argument on non-finite fields or non-positive sizes.
OrientedBox canonicalize_box(OrientedBox box);

/// The eight corners, bottom face first, counter-clockwise in plan view.
std::array<Vec3, 8> box_corners(const OrientedBox& box);

/// Stable reorder placing doors before windows, remapping nothing else.
StructuredScene canonical_order(StructuredScene scene);

/// Position of an opening along its wall (signed distance from wall.a).
double opening_offset(const Opening& opening, const WallSegment& wall);

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace semshift
