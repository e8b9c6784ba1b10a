#include "semshift/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "semshift/geometry.hpp"
#include "semshift/rng.hpp"

namespace semshift::synth {

namespace {

void check_range(const Range& r, const char* name, bool positive = true) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi || (positive && !(r.lo > 0.0)))
    throw std::invalid_argument(std::string("GenParams: bad range ") + name);
}

void check_range(const IntRange& r, const char* name) {
  if (r.lo < 0 || r.lo > r.hi) throw std::invalid_argument(std::string("GenParams: bad range ") + name);
}

Vec3 normalized(Vec3 v) { return v * (1.0 / v.norm()); }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Stochastic rounding keeps the expected sample count equal to area * density.
std::size_t sample_count(double area, double density, Rng& rng) {
  const double mean = area * density;
  const double base = std::floor(mean);
  return static_cast<std::size_t>(base) + (rng.uniform() < mean - base ? 1 : 0);
}

std::vector<double> surface_raw(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

std::vector<double> jitter_raw(const std::vector<double>& base, Rng& rng) {
  std::vector<double> out(base.size());
  for (std::size_t j = 0; j < base.size(); ++j)
    out[j] = std::clamp(base[j] + 0.05 * rng.normal(), 0.0, 1.0);
  return out;
}

Vec3 jitter_pos(const Vec3& p, double sigma, Rng& rng) {
  if (sigma == 0.0) return p;
  return {p.x + sigma * rng.normal(), p.y + sigma * rng.normal(), p.z + sigma * rng.normal()};
}

}  // namespace

void GenParams::validate() const {
  check_range(room_width, "room_width");
  check_range(room_depth, "room_depth");
  check_range(room_height, "room_height");
  check_range(door_width, "door_width");
  check_range(door_height, "door_height");
  check_range(window_width, "window_width");
  check_range(window_height, "window_height");
  check_range(window_sill, "window_sill");
  check_range(furniture_footprint, "furniture_footprint");
  check_range(furniture_height, "furniture_height");
  check_range(doors, "doors");
  check_range(windows, "windows");
  check_range(furniture, "furniture");
  if (!(wall_thickness > 0.0)) throw std::invalid_argument("GenParams: wall_thickness must be > 0");
  if (!(density > 0.0)) throw std::invalid_argument("GenParams: density must be > 0");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("GenParams: noise_sigma must be >= 0");
  if (!(clearance >= 0.0) || !(opening_margin >= 0.0))
    throw std::invalid_argument("GenParams: clearances must be >= 0");
  if (max_attempts <= 0) throw std::invalid_argument("GenParams: max_attempts must be > 0");
  if (cameras < 0 || cameras > 8) throw std::invalid_argument("GenParams: cameras must lie in [0, 8]");
  if (!(focal > 0.0) || raster_width <= 0 || raster_height <= 0)
    throw std::invalid_argument("GenParams: camera intrinsics must be positive");
  if (door_height.hi >= room_height.lo)
    throw std::invalid_argument("GenParams: doors must be lower than the room");
}

Camera Camera::look_at(int view_id, Vec3 position, Vec3 target, double focal, int width,
                       int height) {
  Camera c;
  c.view_id = view_id;
  c.position = position;
  c.forward = normalized(target - position);
  c.right = normalized(cross(c.forward, {0, 0, 1}));
  c.down = cross(c.forward, c.right);
  c.focal = focal;
  c.width = width;
  c.height = height;
  return c;
}

std::optional<Camera::Projection> Camera::project(const Vec3& p) const {
  const Vec3 d = p - position;
  const double z = forward.dot(d);
  if (!(z > 1e-9)) return std::nullopt;
  const double u = 0.5 * width + focal * right.dot(d) / z;
  const double v = 0.5 * height + focal * down.dot(d) / z;
  if (!(u >= 0.0 && v >= 0.0 && u < width && v < height)) return std::nullopt;
  return Projection{static_cast<int>(std::floor(u)), static_cast<int>(std::floor(v)), z};
}

StructuredScene generate_layout(const GenParams& params) {
  params.validate();
  Rng rng(mix_seed(params.seed, 1));
  const double W = rng.uniform(params.room_width.lo, params.room_width.hi);
  const double D = rng.uniform(params.room_depth.lo, params.room_depth.hi);
  const double H = rng.uniform(params.room_height.lo, params.room_height.hi);

  StructuredScene scene;
  const std::array<Vec3, 4> corners{Vec3{0, 0, 0}, Vec3{W, 0, 0}, Vec3{W, D, 0}, Vec3{0, D, 0}};
  for (std::size_t i = 0; i < 4; ++i)
    scene.walls.push_back({corners[i], corners[(i + 1) % 4], H, params.wall_thickness});

  // Openings: wall index, interval along the wall.
  struct Slot {
    int wall;
    double t0;
    double t1;
  };
  std::vector<Slot> slots;
  auto place = [&](OpeningKind kind) {
    const bool door = kind == OpeningKind::Door;
    const double width = rng.uniform(door ? params.door_width.lo : params.window_width.lo,
                                     door ? params.door_width.hi : params.window_width.hi);
    double height = rng.uniform(door ? params.door_height.lo : params.window_height.lo,
                                door ? params.door_height.hi : params.window_height.hi);
    const double bottom = door ? 0.0 : rng.uniform(params.window_sill.lo, params.window_sill.hi);
    height = std::min(height, H - 0.1 - bottom);
    if (!(height > 0.1)) throw InfeasibleParams("generate_layout: window does not fit the room height");
    for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
      const int wall = static_cast<int>(rng.index(4));
      const WallSegment& w = scene.walls[static_cast<std::size_t>(wall)];
      const double len = w.length();
      const double room = len - 2 * params.opening_margin - width;
      if (room <= 0.0) continue;
      const double t0 = params.opening_margin + rng.uniform() * room;
      const double t1 = t0 + width;
      bool clash = false;
      for (const auto& s : slots)
        clash = clash || (s.wall == wall && t0 < s.t1 + params.opening_margin &&
                          s.t0 < t1 + params.opening_margin);
      if (clash) continue;
      slots.push_back({wall, t0, t1});
      const Vec3 dir = (w.b - w.a) * (1.0 / len);
      const Vec3 mid = w.a + dir * (0.5 * (t0 + t1));
      scene.openings.push_back({kind, wall, {mid.x, mid.y, bottom + height / 2}, width, height});
      return;
    }
    throw InfeasibleParams("generate_layout: could not place an opening after " +
                           std::to_string(params.max_attempts) + " attempts");
  };
  const int n_doors = rng.integer(params.doors.lo, params.doors.hi);
  const int n_windows = rng.integer(params.windows.lo, params.windows.hi);
  for (int i = 0; i < n_doors; ++i) place(OpeningKind::Door);
  for (int i = 0; i < n_windows; ++i) place(OpeningKind::Window);

  const int n_furniture = rng.integer(params.furniture.lo, params.furniture.hi);
  const double inner = params.wall_thickness / 2 + params.clearance;
  std::vector<std::array<geom::Vec2, 4>> placed;
  for (int i = 0; i < n_furniture; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < params.max_attempts && !ok; ++attempt) {
      OrientedBox b;
      b.size = {rng.uniform(params.furniture_footprint.lo, params.furniture_footprint.hi),
                rng.uniform(params.furniture_footprint.lo, params.furniture_footprint.hi),
                rng.uniform(params.furniture_height.lo, params.furniture_height.hi)};
      b.yaw = rng.uniform(-kPi / 2, kPi / 2);
      b.center = {rng.uniform(inner, W - inner), rng.uniform(inner, D - inner), b.size.z / 2};
      const auto fp = geom::box_footprint(b);
      bool inside = true;
      for (const auto& c : fp)
        inside = inside && c.x >= inner && c.x <= W - inner && c.y >= inner && c.y <= D - inner;
      if (!inside) continue;
      bool clear = true;
      for (const auto& other : placed)
        clear = clear && geom::convex_distance(fp, other) >= params.clearance;
      if (!clear) continue;
      placed.push_back(fp);
      scene.boxes.push_back(canonicalize_box(b));
      ok = true;
    }
    if (!ok)
      throw InfeasibleParams("generate_layout: could not place furniture " + std::to_string(i) +
                             " after " + std::to_string(params.max_attempts) + " attempts");
  }
  scene = canonical_order(std::move(scene));
  const auto violations = validate_scene(scene);
  if (!violations.empty())
    throw std::logic_error("generate_layout: produced an invalid scene: " +
                           violations.front().message());
  return scene;
}

SemanticPointCloud sample_points(const StructuredScene& scene, const GenParams& params) {
  Rng rng(mix_seed(params.seed, 2));
  SemanticPointCloud cloud;
  cloud.d_raw = 3;
  auto emit = [&](const Vec3& p, const std::vector<double>& base, SemanticGroup g,
                  std::optional<int> instance) {
    SemanticPoint pt;
    pt.pos = jitter_pos(p, params.noise_sigma, rng);
    pt.raw = jitter_raw(base, rng);
    pt.gt_group = g;
    pt.instance_id = instance;
    cloud.points.push_back(std::move(pt));
  };

  for (std::size_t wi = 0; wi < scene.walls.size(); ++wi) {
    const WallSegment& w = scene.walls[wi];
    const double len = w.length();
    const Vec3 dir = (w.b - w.a) * (1.0 / len);
    const auto wall_raw = surface_raw(rng);
    std::vector<std::pair<const Opening*, std::vector<double>>> holes;
    for (const auto& o : scene.openings)
      if (o.wall_index == static_cast<int>(wi)) holes.emplace_back(&o, surface_raw(rng));
    const std::size_t n = sample_count(len * w.height, params.density, rng);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = rng.uniform() * len;
      const double z = w.a.z + rng.uniform() * w.height;
      const std::vector<double>* raw = &wall_raw;
      SemanticGroup g = SemanticGroup::Wall;
      for (const auto& [o, hole_raw] : holes) {
        const double c = opening_offset(*o, w);
        if (std::abs(t - c) <= o->width / 2 && std::abs(z - o->center.z) <= o->height / 2) {
          g = SemanticGroup::Opening;
          raw = &hole_raw;
          break;
        }
      }
      emit(w.a + dir * t + Vec3{0, 0, z - w.a.z}, *raw, g, std::nullopt);
    }
  }

  std::vector<std::array<geom::Vec2, 4>> footprints;
  for (const auto& b : scene.boxes) footprints.push_back(geom::box_footprint(b));

  if (params.sample_floor && !scene.walls.empty()) {
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
    double x1 = -x0, y1 = -x0;
    for (const auto& w : scene.walls)
      for (const auto& p : {w.a, w.b}) {
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
      }
    const double floor_z = scene.walls.front().a.z;
    const auto floor_raw = surface_raw(rng);
    const std::size_t n = sample_count((x1 - x0) * (y1 - y0), params.density, rng);
    for (std::size_t k = 0; k < n; ++k) {
      const geom::Vec2 q{rng.uniform(x0, x1), rng.uniform(y0, y1)};
      bool covered = false;
      for (const auto& fp : footprints) covered = covered || geom::point_in_convex(q, fp);
      if (covered) continue;
      emit({q.x, q.y, floor_z}, floor_raw, SemanticGroup::Other, std::nullopt);
    }
  }

  for (std::size_t bi = 0; bi < scene.boxes.size(); ++bi) {
    const OrientedBox& b = scene.boxes[bi];
    const auto raw = surface_raw(rng);
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    auto world = [&](double lx, double ly, double lz) {
      return Vec3{b.center.x + c * lx - s * ly, b.center.y + s * lx + c * ly, b.center.z + lz};
    };
    const double hx = b.size.x / 2, hy = b.size.y / 2, hz = b.size.z / 2;
    const int id = static_cast<int>(bi);
    // Top face, then the four sides.
    std::size_t n = sample_count(b.size.x * b.size.y, params.density, rng);
    for (std::size_t k = 0; k < n; ++k)
      emit(world(rng.uniform(-hx, hx), rng.uniform(-hy, hy), hz), raw, SemanticGroup::Furniture, id);
    for (int side = 0; side < 4; ++side) {
      const bool along_x = side % 2 == 0;
      const double span = along_x ? b.size.x : b.size.y;
      const double sign = side < 2 ? -1.0 : 1.0;
      n = sample_count(span * b.size.z, params.density, rng);
      for (std::size_t k = 0; k < n; ++k) {
        const double a = rng.uniform(-span / 2, span / 2);
        const double z = rng.uniform(-hz, hz);
        emit(along_x ? world(a, sign * hy, z) : world(sign * hx, a, z), raw,
             SemanticGroup::Furniture, id);
      }
    }
  }
  return cloud;
}

std::vector<Camera> default_cameras(const StructuredScene& scene, const GenParams& params) {
  std::vector<Camera> out;
  if (scene.walls.empty() || params.cameras == 0) return out;
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  for (const auto& w : scene.walls)
    for (const auto& p : {w.a, w.b}) {
      x0 = std::min(x0, p.x);
      y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
  const double in = params.camera_inset;
  const double z = scene.walls.front().a.z + params.camera_height;
  const Vec3 center{0.5 * (x0 + x1), 0.5 * (y0 + y1), scene.walls.front().a.z + 0.9};
  const std::array<Vec3, 8> spots{Vec3{x0 + in, y0 + in, z},          Vec3{x1 - in, y0 + in, z},
                                  Vec3{x1 - in, y1 - in, z},          Vec3{x0 + in, y1 - in, z},
                                  Vec3{0.5 * (x0 + x1), y0 + in, z},  Vec3{x1 - in, 0.5 * (y0 + y1), z},
                                  Vec3{0.5 * (x0 + x1), y1 - in, z},  Vec3{x0 + in, 0.5 * (y0 + y1), z}};
  for (int i = 0; i < params.cameras; ++i)
    out.push_back(Camera::look_at(i, spots[static_cast<std::size_t>(i)], center, params.focal,
                                  params.raster_width, params.raster_height));
  return out;
}

Projected project_masks(const SemanticPointCloud& cloud, const std::vector<Camera>& cameras) {
  Projected out;
  out.pmap.support.assign(cloud.size(), {});
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  for (const auto& cam : cameras) {
    if (!(cam.focal > 0.0)) throw std::invalid_argument("project_masks: focal must be > 0");
    ViewMaskSet view(cam.view_id, cam.width, cam.height);
    const std::size_t pixels = static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height);
    std::vector<double> depth(pixels, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> winner(pixels, kNone);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto pr = cam.project(cloud.points[i].pos);
      if (!pr) continue;
      const std::size_t off = view.offset(pr->u, pr->v);
      if (pr->depth < depth[off]) {
        depth[off] = pr->depth;
        winner[off] = i;
      }
    }
    for (int v = 0; v < cam.height; ++v)
      for (int u = 0; u < cam.width; ++u) {
        const std::size_t i = winner[view.offset(u, v)];
        if (i == kNone) continue;
        out.pmap.support[i].push_back({cam.view_id, u, v});
        const SemanticGroup g = cloud.points[i].gt_group;
        if (is_foreground(g)) view.set(g, u, v);
      }
    out.views.push_back(std::move(view));
  }
  return out;
}

Projected degrade_views(const Projected& in, double drop_fraction, std::uint64_t seed) {
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0))
    throw std::invalid_argument("degrade_views: drop_fraction must lie in [0, 1)");
  Projected out = in;
  if (drop_fraction == 0.0) return out;
  Rng rng(seed);
  for (auto& support : out.pmap.support) {
    std::vector<PixelRef> kept;
    for (const auto& px : support) {
      if (rng.uniform() >= drop_fraction) {
        kept.push_back(px);
        continue;
      }
      for (auto& view : out.views)
        if (view.view_id == px.view_id && view.contains(px.u, px.v)) view.clear(px.u, px.v);
    }
    support = std::move(kept);
  }
  return out;
}

SceneBundle generate_scene(const GenParams& params) {
  SceneBundle b;
  b.params = params;
  b.scene = generate_layout(params);
  b.cloud = sample_points(b.scene, params);
  b.cameras = default_cameras(b.scene, params);
  Projected proj = project_masks(b.cloud, b.cameras);
  const GroupAssignment assign = assign_groups(proj.views, proj.pmap, b.cloud.size());
  b.cloud = concat_features(std::move(b.cloud), encode_rgbb(assign));
  b.views = std::move(proj.views);
  b.pmap = std::move(proj.pmap);
  return b;
}

}  // namespace semshift::synth
