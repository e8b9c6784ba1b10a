#pragma once

#include <array>
#include <span>
#include <vector>

#include "semshift/core.hpp"

namespace semshift::geom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const;
};

using Polygon = std::vector<Vec2>;

/// Counter-clockwise corners of a rectangle with the given center, half extents and heading.
std::array<Vec2, 4> oriented_rect(Vec2 center, double half_x, double half_y, double yaw);

/// Plan-view footprint of a box (counter-clockwise).
std::array<Vec2, 4> box_footprint(const OrientedBox& box);

/// Plan-view rectangle of a wall: its segment thickened symmetrically.
std::array<Vec2, 4> wall_footprint(const WallSegment& wall);

/// Signed shoelace area (positive for counter-clockwise).
double signed_area(std::span<const Vec2> poly);

/// Intersection of two convex counter-clockwise polygons (Sutherland-Hodgman).
Polygon clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// Area of the intersection of two convex counter-clockwise polygons.
double convex_intersection_area(std::span<const Vec2> a, std::span<const Vec2> b);

bool point_in_convex(Vec2 p, std::span<const Vec2> poly);

/// Minimum distance between two convex polygons; zero when they overlap.
double convex_distance(std::span<const Vec2> a, std::span<const Vec2> b);

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

inline Vec2 xy(const Vec3& v) { return {v.x, v.y}; }

}  // namespace semshift::geom
