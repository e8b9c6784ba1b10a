#include <doctest.h>

#include <random>

#include "semshift/geometry.hpp"
#include "semshift/synth.hpp"

using namespace semshift;
using namespace semshift::synth;

namespace {

GenParams params_for(std::uint64_t seed) {
  GenParams p;
  p.seed = seed;
  return p;
}

// Separating-axis test on two plan-view rectangles.
bool footprints_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto fa = geom::box_footprint(a);
  const auto fb = geom::box_footprint(b);
  for (const auto* poly : {&fa, &fb})
    for (std::size_t i = 0; i < 4; ++i) {
      const geom::Vec2 e = (*poly)[(i + 1) % 4] - (*poly)[i];
      const geom::Vec2 n{-e.y, e.x};
      double alo = 1e300, ahi = -1e300, blo = 1e300, bhi = -1e300;
      for (const auto& p : fa) alo = std::min(alo, n.dot(p)), ahi = std::max(ahi, n.dot(p));
      for (const auto& p : fb) blo = std::min(blo, n.dot(p)), bhi = std::max(bhi, n.dot(p));
      if (ahi < blo || bhi < alo) return false;
    }
  return true;
}

}  // namespace

TEST_CASE("pinhole projection") {
  const auto cam = Camera::look_at(0, {0, 0, 1}, {2, 0, 1}, 280.0, 640, 480);
  const auto axis = cam.project({2, 0, 1});
  REQUIRE(axis);
  CHECK(axis->u == 320);
  CHECK(axis->v == 240);
  CHECK(axis->depth == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_FALSE(cam.project({-1, 0, 1}));

  // Off-axis oracle: u = cx + f * lateral / depth, v grows downward.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.5, 6.0), l(-1.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const double depth = d(rng), y = l(rng), z = l(rng);
    const double u = 320.0 + 280.0 * (-y) / depth;  // +y is to the left when looking along +x
    const double v = 240.0 + 280.0 * (-z) / depth;
    const auto pr = cam.project({depth, y, 1.0 + z});
    if (u < 0 || v < 0 || u >= 640 || v >= 480) {
      CHECK_FALSE(pr);
      continue;
    }
    REQUIRE(pr);
    CHECK(pr->u == static_cast<int>(std::floor(u)));
    CHECK(pr->v == static_cast<int>(std::floor(v)));
  }
}

TEST_CASE("project_masks: z-buffer keeps the nearest point per pixel") {
  const std::vector<Camera> cams{Camera::look_at(3, {0, 0, 1}, {2, 0, 1}, 280.0, 64, 48)};
  SemanticPointCloud c;
  c.points.push_back({{2, 0, 1}, {0, 0, 0}, {}, SemanticGroup::Wall, {}});
  c.points.push_back({{1, 0, 1}, {0, 0, 0}, {}, SemanticGroup::Furniture, 0});
  c.points.push_back({{-1, 0, 1}, {0, 0, 0}, {}, SemanticGroup::Opening, {}});
  const auto pr = project_masks(c, cams);
  REQUIRE(pr.pmap.support.size() == 3);
  CHECK(pr.pmap.support[0].empty());  // occluded
  REQUIRE(pr.pmap.support[1].size() == 1);
  CHECK(pr.pmap.support[1][0] == PixelRef{3, 32, 24});
  CHECK(pr.pmap.support[2].empty());  // behind the camera
  CHECK(pr.views[0].at(SemanticGroup::Furniture, 32, 24) == 1);
  CHECK(pr.views[0].at(SemanticGroup::Wall, 32, 24) == 0);
}

TEST_CASE("generate_scene is deterministic and valid over 100 seeds") {
  std::size_t supported = 0, recovered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = params_for(seed);
    const auto layout = generate_layout(p);
    CHECK(validate_scene(layout).empty());
    CHECK(layout.walls.size() == 4);
    for (std::size_t i = 0; i < layout.boxes.size(); ++i)
      for (std::size_t j = i + 1; j < layout.boxes.size(); ++j) {
        CHECK_FALSE(footprints_overlap(layout.boxes[i], layout.boxes[j]));
        const auto fi = geom::box_footprint(layout.boxes[i]);
        const auto fj = geom::box_footprint(layout.boxes[j]);
        CHECK(geom::convex_distance(fi, fj) >= p.clearance - 1e-9);
      }
    if (seed < 10) {
      const auto a = generate_scene(p);
      const auto b = generate_scene(p);
      CHECK(a.cloud == b.cloud);
      CHECK(a.scene == b.scene);
      CHECK(a.pmap == b.pmap);
      CHECK(a.views == b.views);
      CHECK(a.scene == layout);
      for (std::size_t i = 0; i < a.cloud.size(); ++i) {
        const auto& pt = a.cloud.points[i];
        CHECK(pt.instance_id.has_value() == (pt.gt_group == SemanticGroup::Furniture));
        if (a.pmap.support[i].empty()) continue;
        ++supported;
        recovered += group_of_color(pt.color) == pt.gt_group;
      }
    }
  }
  REQUIRE(supported > 0);
  const double fidelity = static_cast<double>(recovered) / static_cast<double>(supported);
  MESSAGE("lift fidelity on supported points: " << fidelity);
  CHECK(fidelity >= 0.99);
}

TEST_CASE("furniture count zero means no furniture points") {
  auto p = params_for(5);
  p.furniture = {0, 0};
  const auto b = generate_scene(p);
  CHECK(b.scene.boxes.empty());
  for (const auto& pt : b.cloud.points) {
    CHECK(pt.gt_group != SemanticGroup::Furniture);
    CHECK_FALSE(pt.instance_id);
  }
}

TEST_CASE("infeasible and invalid parameters") {
  auto p = params_for(1);
  p.furniture = {40, 40};
  p.furniture_footprint = {1.5, 2.0};
  p.max_attempts = 50;
  CHECK_THROWS_AS(generate_layout(p), InfeasibleParams);
  auto q = params_for(1);
  q.density = 0.0;
  CHECK_THROWS_AS(generate_layout(q), std::invalid_argument);
  q = params_for(1);
  q.room_width = {5.0, 4.0};
  CHECK_THROWS_AS(generate_layout(q), std::invalid_argument);
}

TEST_CASE("degrade_views") {
  const auto b = generate_scene(params_for(7));
  const Projected in{b.views, b.pmap};
  const auto same = degrade_views(in, 0.0, 1);
  CHECK(same.pmap == in.pmap);
  CHECK(same.views == in.views);

  const std::size_t before = in.pmap.association_count();
  REQUIRE(before >= 10000);
  const auto d = degrade_views(in, 0.9, 3);
  const double kept = static_cast<double>(d.pmap.association_count()) / static_cast<double>(before);
  CHECK(std::abs(kept - 0.1) <= 0.01);
  CHECK(degrade_views(in, 0.9, 3).pmap == d.pmap);
  CHECK_THROWS_AS(degrade_views(in, 1.0, 3), std::invalid_argument);

  // Points left without support fall back to Other.
  const auto assign = assign_groups(d.views, d.pmap, b.cloud.size());
  for (std::size_t i = 0; i < d.pmap.support.size(); ++i)
    if (d.pmap.support[i].empty()) CHECK(assign.groups[i] == SemanticGroup::Other);
}
