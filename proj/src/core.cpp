#include "semshift/core.hpp"

#include <algorithm>

namespace semshift {

int foreground_index(SemanticGroup g) {
  switch (g) {
    case SemanticGroup::Furniture: return 0;
    case SemanticGroup::Wall: return 1;
    case SemanticGroup::Opening: return 2;
    case SemanticGroup::Other: break;
  }
  throw std::invalid_argument("foreground_index: Other is not a foreground group");
}

std::string_view group_name(SemanticGroup g) {
  switch (g) {
    case SemanticGroup::Furniture: return "furniture";
    case SemanticGroup::Wall: return "wall";
    case SemanticGroup::Opening: return "opening";
    case SemanticGroup::Other: return "other";
  }
  return "other";
}

std::optional<SemanticGroup> group_from_name(std::string_view name) {
  for (auto g : {SemanticGroup::Furniture, SemanticGroup::Wall, SemanticGroup::Opening,
                 SemanticGroup::Other}) {
    if (group_name(g) == name) return g;
  }
  return std::nullopt;
}

namespace {

constexpr double kExtentTol = 1e-3;

bool finite_all(std::initializer_list<double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

double opening_offset(const Opening& opening, const WallSegment& wall) {
  const Vec3 d = wall.b - wall.a;
  const double len = std::hypot(d.x, d.y);
  if (len <= 0.0) return 0.0;
  return ((opening.center.x - wall.a.x) * d.x + (opening.center.y - wall.a.y) * d.y) / len;
}

std::vector<Violation> validate_scene(const StructuredScene& scene) {
  std::vector<Violation> out;
  auto add = [&out](std::string kind, std::string what, std::size_t i) {
    out.push_back({std::move(kind), std::move(what) + " " + std::to_string(i)});
  };

  for (std::size_t i = 0; i < scene.walls.size(); ++i) {
    const auto& w = scene.walls[i];
    if (!w.a.finite() || !w.b.finite() || !finite_all({w.height, w.thickness})) {
      add("non-finite value", "wall", i);
      continue;
    }
    if (std::hypot(w.b.x - w.a.x, w.b.y - w.a.y) <= 0.0) add("degenerate wall", "wall", i);
    if (w.a.z != w.b.z) add("non-level wall", "wall", i);
    if (!(w.height > 0.0) || !(w.thickness > 0.0)) add("non-positive size", "wall", i);
  }

  for (std::size_t i = 0; i < scene.openings.size(); ++i) {
    const auto& o = scene.openings[i];
    if (!o.center.finite() || !finite_all({o.width, o.height})) {
      add("non-finite value", "opening", i);
      continue;
    }
    if (!(o.width > 0.0) || !(o.height > 0.0)) add("non-positive size", "opening", i);
    if (o.wall_index < 0 || static_cast<std::size_t>(o.wall_index) >= scene.walls.size()) {
      add("dangling wall reference", "opening", i);
      continue;
    }
    const auto& w = scene.walls[static_cast<std::size_t>(o.wall_index)];
    const double len = std::hypot(w.b.x - w.a.x, w.b.y - w.a.y);
    if (!(len > 0.0)) continue;
    const double t = opening_offset(o, w);
    const double nx = -(w.b.y - w.a.y) / len;
    const double ny = (w.b.x - w.a.x) / len;
    const double dist = std::abs((o.center.x - w.a.x) * nx + (o.center.y - w.a.y) * ny);
    const bool inside = t - o.width / 2 >= -kExtentTol && t + o.width / 2 <= len + kExtentTol &&
                        o.center.z - o.height / 2 >= w.a.z - kExtentTol &&
                        o.center.z + o.height / 2 <= w.a.z + w.height + kExtentTol &&
                        dist <= w.thickness / 2 + kExtentTol;
    if (!inside) add("opening outside wall", "opening", i);
  }

  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    const auto& b = scene.boxes[i];
    if (!b.center.finite() || !b.size.finite() || !std::isfinite(b.yaw)) {
      add("non-finite value", "box", i);
      continue;
    }
    if (!(b.size.x > 0.0) || !(b.size.y > 0.0) || !(b.size.z > 0.0))
      add("non-positive size", "box", i);
    if (!(b.yaw >= -kPi / 2 && b.yaw < kPi / 2)) add("non-canonical yaw", "box", i);
    if (b.category.empty()) add("empty category", "box", i);
  }
  return out;
}

OrientedBox canonicalize_box(OrientedBox box) {
  if (!box.center.finite() || !box.size.finite() || !std::isfinite(box.yaw))
    throw std::invalid_argument("canonicalize_box: non-finite field");
  if (!(box.size.x > 0.0) || !(box.size.y > 0.0) || !(box.size.z > 0.0))
    throw std::invalid_argument("canonicalize_box: non-positive size");
  // A half turn maps the footprint onto itself, so only the period-pi residue matters.
  double yaw = std::fmod(box.yaw + kPi / 2, kPi);
  if (yaw < 0.0) yaw += kPi;
  yaw -= kPi / 2;
  if (yaw >= kPi / 2) yaw -= kPi;
  if (yaw < -kPi / 2) yaw += kPi;
  // Values already in range are kept bit-for-bit so canonicalization is idempotent.
  if (!(box.yaw >= -kPi / 2 && box.yaw < kPi / 2)) box.yaw = yaw;
  return box;
}

std::array<Vec3, 8> box_corners(const OrientedBox& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hx = box.size.x / 2;
  const double hy = box.size.y / 2;
  const double hz = box.size.z / 2;
  constexpr std::array<std::array<double, 2>, 4> sign{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
  std::array<Vec3, 8> out;
  for (int level = 0; level < 2; ++level) {
    for (int k = 0; k < 4; ++k) {
      const double lx = sign[k][0] * hx;
      const double ly = sign[k][1] * hy;
      out[level * 4 + k] = {box.center.x + c * lx - s * ly, box.center.y + s * lx + c * ly,
                            box.center.z + (level == 0 ? -hz : hz)};
    }
  }
  return out;
}

StructuredScene canonical_order(StructuredScene scene) {
  std::stable_partition(scene.openings.begin(), scene.openings.end(),
                        [](const Opening& o) { return o.kind == OpeningKind::Door; });
  return scene;
}

}  // namespace semshift
