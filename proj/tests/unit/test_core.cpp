#include <doctest.h>

#include <algorithm>
#include <random>

#include "semshift/core.hpp"

using namespace semshift;

namespace {

// Every corner of a has a partner in b within tol, and vice versa.
bool same_corner_set(const OrientedBox& a, const OrientedBox& b, double tol) {
  const auto ca = box_corners(a);
  const auto cb = box_corners(b);
  auto covered = [tol](const auto& x, const auto& y) {
    return std::all_of(x.begin(), x.end(), [&](const Vec3& p) {
      return std::any_of(y.begin(), y.end(), [&](const Vec3& q) { return (p - q).norm() <= tol; });
    });
  };
  return covered(ca, cb) && covered(cb, ca);
}

bool has_kind(const std::vector<Violation>& v, const std::string& kind) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.kind == kind; });
}

StructuredScene two_walls() {
  StructuredScene s;
  s.walls.push_back({{0, 0, 0}, {4, 0, 0}, 2.5, 0.1});
  s.walls.push_back({{4, 0, 0}, {4, 3, 0}, 2.5, 0.1});
  return s;
}

}  // namespace

TEST_CASE("foreground indexing is fixed") {
  CHECK(foreground_index(SemanticGroup::Furniture) == 0);
  CHECK(foreground_index(SemanticGroup::Wall) == 1);
  CHECK(foreground_index(SemanticGroup::Opening) == 2);
  CHECK_THROWS_AS(foreground_index(SemanticGroup::Other), std::invalid_argument);
  for (auto g : {SemanticGroup::Furniture, SemanticGroup::Wall, SemanticGroup::Opening, SemanticGroup::Other})
    CHECK(group_from_name(group_name(g)) == g);
  CHECK_FALSE(group_from_name("ceiling"));
}

TEST_CASE("validate_scene") {
  CHECK(validate_scene({}).empty());

  auto s = two_walls();
  s.openings.push_back({OpeningKind::Door, 3, {1, 0, 1}, 0.9, 2.0});
  CHECK(has_kind(validate_scene(s), "dangling wall reference"));

  s.openings[0].wall_index = 0;
  CHECK(validate_scene(s).empty());

  s.boxes.push_back({"chair", {1, 1, 0.5}, 0.0, {1, 1, 0}});
  const auto v = validate_scene(s);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == "non-positive size");
  CHECK(v[0].element == "box 0");

  s.boxes[0].size.z = 1.0;
  s.walls[1].b.z = 0.2;
  CHECK(has_kind(validate_scene(s), "non-level wall"));

  s.walls[1].b.z = 0.0;
  s.boxes[0].center.x = std::nan("");
  CHECK(has_kind(validate_scene(s), "non-finite value"));

  s.boxes[0].center.x = 1.0;
  s.openings[0].center.x = 3.9;  // hangs past the wall end
  CHECK(has_kind(validate_scene(s), "opening outside wall"));
}

TEST_CASE("canonicalize_box examples") {
  const OrientedBox half_turn{"t", {0, 0, 0}, kPi, {2, 1, 1}};
  const auto a = canonicalize_box(half_turn);
  CHECK(std::abs(a.yaw) < 1e-12);
  CHECK(a.size == Vec3{2, 1, 1});
  CHECK(same_corner_set(a, half_turn, 1e-9));

  const OrientedBox quarter{"t", {1, 2, 0.5}, kPi / 2, {2, 1, 1}};
  const auto q = canonicalize_box(quarter);
  CHECK(q.yaw >= -kPi / 2);
  CHECK(q.yaw < kPi / 2);
  CHECK(same_corner_set(q, quarter, 1e-9));
  // The swapped-axes form occupies the same set too.
  CHECK(same_corner_set(q, OrientedBox{"t", {1, 2, 0.5}, 0.0, {1, 2, 1}}, 1e-9));

  const OrientedBox small{"t", {0, 0, 0}, 0.1, {1, 2, 3}};
  CHECK(canonicalize_box(small) == small);

  CHECK_THROWS_AS(canonicalize_box({"t", {0, 0, 0}, std::nan(""), {1, 1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(canonicalize_box({"t", {0, 0, 0}, 0.0, {1, 0, 1}}), std::invalid_argument);
}

TEST_CASE("canonicalize_box: idempotent and occupancy-preserving on random boxes") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> yaw(-20.0, 20.0), sz(0.1, 3.0), c(-5.0, 5.0);
  for (int t = 0; t < 2000; ++t) {
    const OrientedBox b{"x", {c(rng), c(rng), c(rng)}, yaw(rng), {sz(rng), sz(rng), sz(rng)}};
    const auto once = canonicalize_box(b);
    CHECK(once.yaw >= -kPi / 2);
    CHECK(once.yaw < kPi / 2);
    CHECK(canonicalize_box(once) == once);
    CHECK(same_corner_set(once, b, 1e-9));
  }
  // Boundary: -pi/2 stays, +pi/2 maps onto -pi/2.
  CHECK(canonicalize_box({"x", {}, -kPi / 2, {1, 1, 1}}).yaw == -kPi / 2);
  CHECK(canonicalize_box({"x", {}, kPi / 2, {1, 1, 1}}).yaw < kPi / 2);
}

TEST_CASE("box corners and opening offset") {
  const auto k = box_corners({"x", {0, 0, 1}, 0.0, {2, 4, 2}});
  CHECK(k[0] == Vec3{-1, -2, 0});
  CHECK(k[2] == Vec3{1, 2, 0});
  CHECK(k[6] == Vec3{1, 2, 2});
  const WallSegment w{{1, 1, 0}, {1, 5, 0}, 2.5, 0.1};
  CHECK(opening_offset({OpeningKind::Window, 0, {1, 3.5, 1.5}, 1.0, 1.0}, w) == doctest::Approx(2.5));
}

TEST_CASE("canonical_order puts doors first, stably") {
  StructuredScene s = two_walls();
  s.openings = {{OpeningKind::Window, 0, {1, 0, 1.5}, 0.5, 0.5},
                {OpeningKind::Door, 1, {4, 1, 1}, 0.8, 2.0},
                {OpeningKind::Window, 0, {3, 0, 1.5}, 0.5, 0.5},
                {OpeningKind::Door, 0, {2, 0, 1}, 0.8, 2.0}};
  const auto o = canonical_order(s).openings;
  CHECK(o[0].center.x == 4);
  CHECK(o[1].center.x == 2);
  CHECK(o[2].center.x == 1);
  CHECK(o[3].center.x == 3);
}
