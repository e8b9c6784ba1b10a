#include "semshift/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace semshift::geom {

double Vec2::norm() const { return std::hypot(x, y); }

std::array<Vec2, 4> oriented_rect(Vec2 center, double half_x, double half_y, double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const Vec2 ax{c * half_x, s * half_x};
  const Vec2 ay{-s * half_y, c * half_y};
  return {center - ax - ay, center + ax - ay, center + ax + ay, center - ax + ay};
}

std::array<Vec2, 4> box_footprint(const OrientedBox& box) {
  return oriented_rect(xy(box.center), box.size.x / 2, box.size.y / 2, box.yaw);
}

std::array<Vec2, 4> wall_footprint(const WallSegment& wall) {
  const Vec2 a = xy(wall.a);
  const Vec2 b = xy(wall.b);
  const Vec2 d = b - a;
  const double len = d.norm();
  return oriented_rect((a + b) * 0.5, len / 2, wall.thickness / 2, std::atan2(d.y, d.x));
}

double signed_area(std::span<const Vec2> poly) {
  double acc = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) acc += poly[i].cross(poly[(i + 1) % n]);
  return acc / 2;
}

Polygon clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  Polygon out(subject.begin(), subject.end());
  for (std::size_t e = 0, m = clip.size(); e < m && !out.empty(); ++e) {
    const Vec2 a = clip[e];
    const Vec2 b = clip[(e + 1) % m];
    const Vec2 edge = b - a;
    Polygon input;
    input.swap(out);
    for (std::size_t i = 0, n = input.size(); i < n; ++i) {
      const Vec2 p = input[i];
      const Vec2 q = input[(i + 1) % n];
      const double sp = edge.cross(p - a);
      const double sq = edge.cross(q - a);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + (q - p) * t);
      }
    }
  }
  return out;
}

double convex_intersection_area(std::span<const Vec2> a, std::span<const Vec2> b) {
  const Polygon inter = clip_convex(a, b);
  if (inter.size() < 3) return 0.0;
  return std::max(0.0, signed_area(inter));
}

bool point_in_convex(Vec2 p, std::span<const Vec2> poly) {
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    if ((poly[(i + 1) % n] - poly[i]).cross(p - poly[i]) < 0) return false;
  }
  return true;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double len2 = d.dot(d);
  double t = len2 > 0 ? (p - a).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + d * t)).norm();
}

double convex_distance(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (convex_intersection_area(a, b) > 0.0) return 0.0;
  for (const auto& p : a)
    if (point_in_convex(p, b)) return 0.0;
  for (const auto& p : b)
    if (point_in_convex(p, a)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      best = std::min(best, point_segment_distance(a[i], b[j], b[(j + 1) % b.size()]));
      best = std::min(best, point_segment_distance(b[j], a[i], a[(i + 1) % a.size()]));
    }
  }
  return best;
}

}  // namespace semshift::geom
