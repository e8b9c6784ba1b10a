#include "semshift/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "semshift/geometry.hpp"

namespace semshift {

void DecoderConfig::validate() const {
  if (!(route_threshold > 1.0 / 3.0 && route_threshold <= 1.0))
    throw std::invalid_argument("DecoderConfig: route_threshold must lie in (1/3, 1]");
  if (min_cluster <= 0) throw std::invalid_argument("DecoderConfig: min_cluster must be > 0");
  if (cluster_link_radius <= 0)
    throw std::invalid_argument("DecoderConfig: cluster_link_radius must be > 0");
  if (!(voxel_size > 0.0) || !(wall_inlier_tol > 0.0) || !(door_floor_tol > 0.0) ||
      !(min_wall_height >= 0.0))
    throw std::invalid_argument("DecoderConfig: lengths must be positive");
}

std::vector<SemanticGroup> label_tokens(const RoutingWeights& w, const DecoderConfig& cfg) {
  std::vector<SemanticGroup> out(static_cast<std::size_t>(w.w.rows()), SemanticGroup::Other);
  for (Eigen::Index i = 0; i < w.w.rows(); ++i) {
    Eigen::Index k = 0;
    const double best = w.w.row(i).maxCoeff(&k);
    if (best >= cfg.route_threshold) out[static_cast<std::size_t>(i)] = kForegroundGroups[static_cast<std::size_t>(k)];
  }
  return out;
}

std::vector<std::vector<std::size_t>> voxel_components(std::span<const GridCoord> cells,
                                                       int link_radius) {
  std::unordered_map<GridCoord, std::vector<std::size_t>, GridCoordHash> index;
  for (std::size_t i = 0; i < cells.size(); ++i) index[cells[i]].push_back(i);

  std::vector<int> comp(cells.size(), -1);
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < cells.size(); ++seed) {
    if (comp[seed] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    comp[seed] = id;
    stack.assign(1, seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      out.back().push_back(cur);
      const GridCoord c = cells[cur];
      for (int dx = -link_radius; dx <= link_radius; ++dx)
        for (int dy = -link_radius; dy <= link_radius; ++dy)
          for (int dz = -link_radius; dz <= link_radius; ++dz) {
            auto it = index.find({c.x + dx, c.y + dy, c.z + dz});
            if (it == index.end()) continue;
            for (auto j : it->second) {
              if (comp[j] >= 0) continue;
              comp[j] = id;
              stack.push_back(j);
            }
          }
    }
    std::sort(out.back().begin(), out.back().end());
  }
  return out;
}

namespace {

// Andrew's monotone chain, counter-clockwise, collinear points dropped.
geom::Polygon convex_hull(std::vector<geom::Vec2> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const geom::Vec2& a, const geom::Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  if (pts.size() < 3) return pts;
  geom::Polygon hull(2 * pts.size());
  std::size_t k = 0;
  auto turn = [](geom::Vec2 o, geom::Vec2 a, geom::Vec2 b) { return (a - o).cross(b - o); };
  for (const auto& p : pts) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

struct Extent {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
};

double footprint_area(std::span<const geom::Vec2> pts, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Extent u, v;
  for (const auto& p : pts) {
    u.add(c * p.x + s * p.y);
    v.add(-s * p.x + c * p.y);
  }
  return u.span() * v.span();
}

// Normal direction of a plan-view line and a point on it.
struct Line2 {
  geom::Vec2 origin;
  geom::Vec2 dir;
  geom::Vec2 normal() const { return {-dir.y, dir.x}; }
};

// Total least squares through the given points.
Line2 tls_line(std::span<const Vec3> pts, std::span<const std::size_t> idx) {
  geom::Vec2 mean{};
  for (auto i : idx) mean = mean + geom::xy(pts[i]);
  mean = mean * (1.0 / static_cast<double>(idx.size()));
  double sxx = 0, sxy = 0, syy = 0;
  for (auto i : idx) {
    const geom::Vec2 d = geom::xy(pts[i]) - mean;
    sxx += d.x * d.x;
    sxy += d.x * d.y;
    syy += d.y * d.y;
  }
  const double theta = 0.5 * std::atan2(2 * sxy, sxx - syy);
  return {mean, {std::cos(theta), std::sin(theta)}};
}

}  // namespace

OrientedBox fit_oriented_box(std::span<const Vec3> points, double padding) {
  if (points.size() < 4) throw std::invalid_argument("fit_oriented_box: need at least 4 points");
  if (!(padding >= 0.0)) throw std::invalid_argument("fit_oriented_box: padding must be >= 0");
  geom::Vec2 mean{};
  for (const auto& p : points) mean = mean + geom::xy(p);
  mean = mean * (1.0 / static_cast<double>(points.size()));
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : points) {
    const geom::Vec2 d = geom::xy(p) - mean;
    sxx += d.x * d.x;
    sxy += d.x * d.y;
    syy += d.y * d.y;
  }
  const double trace = sxx + syy;
  const double gap = std::hypot(sxx - syy, 2 * sxy);  // lambda_max - lambda_min
  const double lambda_min = 0.5 * (trace - gap);
  if (!(trace > 0.0) || lambda_min <= 1e-12 * trace)
    throw std::invalid_argument("fit_oriented_box: plan view is collinear");

  double yaw = 0.0;
  if (gap > 1e-9 * trace) {
    yaw = 0.5 * std::atan2(2 * sxy, sxx - syy);
  } else {
    // Isotropic spread leaves the principal axis undefined; take the hull edge
    // direction with the smallest footprint instead, keeping the first on ties.
    std::vector<geom::Vec2> plan;
    plan.reserve(points.size());
    for (const auto& p : points) plan.push_back(geom::xy(p));
    const auto hull = convex_hull(plan);
    double best = footprint_area(plan, 0.0);
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const geom::Vec2 e = hull[(i + 1) % hull.size()] - hull[i];
      double cand = std::atan2(e.y, e.x);
      cand = std::remainder(cand, kPi / 2);  // rectangle symmetry
      const double area = footprint_area(plan, cand);
      if (area < best * (1 - 1e-12)) {
        best = area;
        yaw = cand;
      }
    }
  }

  const double c = std::cos(yaw), s = std::sin(yaw);
  Extent u, v, z;
  for (const auto& p : points) {
    u.add(c * p.x + s * p.y);
    v.add(-s * p.x + c * p.y);
    z.add(p.z);
  }
  OrientedBox box;
  box.center = {c * u.mid() - s * v.mid(), s * u.mid() + c * v.mid(), z.mid()};
  box.yaw = yaw;
  box.size = {u.span() + 2 * padding, v.span() + 2 * padding, z.span() + 2 * padding};
  if (!(box.size.z > 0.0)) box.size.z = std::max(2 * padding, 1e-3);
  return canonicalize_box(box);
}

std::vector<WallSegment> fit_wall_segments(std::span<const Vec3> points, const DecoderConfig& cfg) {
  cfg.validate();
  const auto min_count = static_cast<std::size_t>(cfg.min_cluster);
  const double tol = cfg.wall_inlier_tol;
  const double pad = 0.5 * cfg.voxel_size;
  std::vector<std::size_t> remaining(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) remaining[i] = i;

  constexpr int kAngles = 180;
  std::array<geom::Vec2, kAngles> normals;
  for (int a = 0; a < kAngles; ++a) {
    const double th = static_cast<double>(a) * kPi / kAngles;
    normals[static_cast<std::size_t>(a)] = {std::cos(th), std::sin(th)};
  }

  std::vector<WallSegment> out;
  std::vector<double> rho;
  while (remaining.size() >= min_count) {
    // Coarse search: densest slab of width 2*tol over 1-degree normal directions.
    std::size_t best_count = 0;
    geom::Vec2 best_n{};
    double best_rho = 0.0;
    for (const auto& n : normals) {
      rho.clear();
      for (auto i : remaining) rho.push_back(n.dot(geom::xy(points[i])));
      std::sort(rho.begin(), rho.end());
      std::size_t lo = 0;
      for (std::size_t hi = 0; hi < rho.size(); ++hi) {
        while (rho[hi] - rho[lo] > 2 * tol) ++lo;
        if (hi - lo + 1 > best_count) {
          best_count = hi - lo + 1;
          best_n = n;
          best_rho = 0.5 * (rho[lo] + rho[hi]);
        }
      }
    }
    if (best_count < min_count) break;

    std::vector<std::size_t> inliers;
    for (auto i : remaining)
      if (std::abs(best_n.dot(geom::xy(points[i])) - best_rho) <= tol) inliers.push_back(i);
    // Two total-least-squares refinements on the current inlier set.
    for (int round = 0; round < 2; ++round) {
      const Line2 line = tls_line(points, inliers);
      std::vector<std::size_t> next;
      for (auto i : remaining)
        if (std::abs(line.normal().dot(geom::xy(points[i]) - line.origin)) <= tol) next.push_back(i);
      if (next.size() < min_count) break;
      inliers = std::move(next);
    }

    const Line2 line = tls_line(points, inliers);
    Extent t, z;
    for (auto i : inliers) {
      t.add(line.dir.dot(geom::xy(points[i]) - line.origin));
      z.add(points[i].z);
    }
    const double height = z.span() + 2 * pad;
    const double base = z.lo - pad;
    if (height >= cfg.min_wall_height && t.span() > 0.0) {
      WallSegment w;
      const geom::Vec2 a = line.origin + line.dir * (t.lo - pad);
      const geom::Vec2 b = line.origin + line.dir * (t.hi + pad);
      w.a = {a.x, a.y, base};
      w.b = {b.x, b.y, base};
      w.height = height;
      out.push_back(w);
    }
    std::vector<std::size_t> rest;
    rest.reserve(remaining.size() - inliers.size());
    std::set_difference(remaining.begin(), remaining.end(), inliers.begin(), inliers.end(),
                        std::back_inserter(rest));
    remaining = std::move(rest);
  }
  return out;
}

std::vector<Opening> fit_openings(std::span<const Vec3> points, std::span<const WallSegment> walls,
                                  const DecoderConfig& cfg) {
  cfg.validate();
  std::vector<Opening> out;
  if (walls.empty() || points.empty()) return out;
  const double pad = 0.5 * cfg.voxel_size;

  std::vector<std::vector<std::size_t>> per_wall(walls.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < walls.size(); ++k) {
      const double d = geom::point_segment_distance(geom::xy(points[i]), geom::xy(walls[k].a),
                                                    geom::xy(walls[k].b));
      if (d < best) {
        best = d;
        arg = k;
      }
    }
    if (best <= walls[arg].thickness + cfg.voxel_size) per_wall[arg].push_back(i);
  }

  for (std::size_t k = 0; k < walls.size(); ++k) {
    const auto& members = per_wall[k];
    if (members.size() < static_cast<std::size_t>(cfg.min_cluster)) continue;
    const WallSegment& wall = walls[k];
    const geom::Vec2 a = geom::xy(wall.a);
    const geom::Vec2 ab = geom::xy(wall.b) - a;
    const double len = ab.norm();
    const geom::Vec2 dir = ab * (1.0 / len);

    // Components in the wall's elevation grid (along-wall, height).
    std::vector<GridCoord> cells;
    cells.reserve(members.size());
    for (auto i : members) {
      const double t = dir.dot(geom::xy(points[i]) - a);
      cells.push_back({static_cast<std::int64_t>(std::floor(t / cfg.voxel_size)), 0,
                       static_cast<std::int64_t>(std::floor((points[i].z - wall.a.z) / cfg.voxel_size))});
    }
    for (const auto& comp : voxel_components(cells, cfg.cluster_link_radius)) {
      if (comp.size() < static_cast<std::size_t>(cfg.min_cluster)) continue;
      Extent t, z;
      for (auto c : comp) {
        const Vec3& p = points[members[c]];
        t.add(dir.dot(geom::xy(p) - a));
        z.add(p.z);
      }
      const double t0 = std::max(0.0, t.lo - pad);
      const double t1 = std::min(len, t.hi + pad);
      const double z0 = std::max(wall.a.z, z.lo - pad);
      const double z1 = std::min(wall.a.z + wall.height, z.hi + pad);
      if (!(t1 > t0) || !(z1 > z0)) continue;
      Opening o;
      o.kind = z0 - wall.a.z <= cfg.door_floor_tol ? OpeningKind::Door : OpeningKind::Window;
      o.wall_index = static_cast<int>(k);
      const geom::Vec2 c = a + dir * (0.5 * (t0 + t1));
      o.center = {c.x, c.y, 0.5 * (z0 + z1)};
      o.width = t1 - t0;
      o.height = z1 - z0;
      out.push_back(o);
    }
  }
  return out;
}

StructuredScene decode(const TokenSequence& tokens, const RoutingWeights& w,
                       const DecoderConfig& cfg) {
  cfg.validate();
  if (w.w.rows() != tokens.size())
    throw std::invalid_argument("decode: routing rows do not match token count");
  const auto labels = label_tokens(w, cfg);

  std::vector<GridCoord> furniture_cells;
  std::vector<Vec3> furniture_pos, wall_pos, opening_pos;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    switch (labels[i]) {
      case SemanticGroup::Furniture:
        furniture_cells.push_back(tokens.coords[i]);
        furniture_pos.push_back(tokens.positions[i]);
        break;
      case SemanticGroup::Wall: wall_pos.push_back(tokens.positions[i]); break;
      case SemanticGroup::Opening: opening_pos.push_back(tokens.positions[i]); break;
      case SemanticGroup::Other: break;
    }
  }

  StructuredScene scene;
  std::vector<Vec3> member_pos;
  for (const auto& comp : voxel_components(furniture_cells, cfg.cluster_link_radius)) {
    if (comp.size() < static_cast<std::size_t>(cfg.min_cluster)) continue;
    member_pos.clear();
    for (auto i : comp) member_pos.push_back(furniture_pos[i]);
    try {
      scene.boxes.push_back(fit_oriented_box(member_pos, 0.5 * cfg.voxel_size));
    } catch (const std::invalid_argument&) {
      // Collinear clusters carry no footprint.
    }
  }
  scene.walls = fit_wall_segments(wall_pos, cfg);
  scene.openings = fit_openings(opening_pos, scene.walls, cfg);
  return canonical_order(std::move(scene));
}

}  // namespace semshift
