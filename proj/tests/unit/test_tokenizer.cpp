#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "semshift/lift.hpp"
#include "semshift/tokenizer.hpp"

using namespace semshift;

namespace {

SemanticPointCloud random_cloud(int n, std::uint64_t seed, double extent = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, extent), a(0.0, 1.0);
  SemanticPointCloud c;
  for (int i = 0; i < n; ++i) {
    SemanticPoint p;
    p.pos = {u(rng), u(rng), u(rng)};
    p.raw = {a(rng), a(rng), a(rng)};
    p.gt_group = static_cast<SemanticGroup>(rng() % 4);
    p.color = color_of(p.gt_group);
    c.points.push_back(p);
  }
  return c;
}

EncoderConfig small_cfg() {
  EncoderConfig cfg;
  cfg.channels = 12;
  cfg.hidden = 16;
  cfg.voxel_size = 0.1;
  return cfg;
}

}  // namespace

TEST_CASE("morton code matches the bit-loop oracle") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20000; ++t) {
    const auto x = static_cast<std::uint32_t>(rng() & 0x1fffff);
    const auto y = static_cast<std::uint32_t>(rng() & 0x1fffff);
    const auto z = static_cast<std::uint32_t>(rng() & 0x1fffff);
    CHECK(morton_encode(x, y, z) == oracle::morton(x, y, z));
  }
  CHECK(morton_encode(1, 0, 0) == 1);
  CHECK(morton_encode(0, 1, 0) == 2);
  CHECK(morton_encode(0, 0, 1) == 4);
  CHECK(morton_encode(3, 3, 3) == 63);
}

TEST_CASE("voxelize") {
  EncoderConfig cfg;  // 5 cm
  SemanticPointCloud c;
  for (double d : {0.0, 0.01, 0.04}) c.points.push_back({{d, d, d}, {0, 0, 0}, {}, SemanticGroup::Other, {}});
  auto g = voxelize(c, cfg);
  REQUIRE(g.cells.size() == 1);
  CHECK(g.cells.begin()->second.size() == 3);

  // 0.25 is an exact multiple of 0.0625, so the boundary point floors to cell 4 and not 3.
  cfg.voxel_size = 0.0625;
  SemanticPointCloud b;
  b.points.push_back({{0, 0, 0}, {0, 0, 0}, {}, SemanticGroup::Other, {}});
  b.points.push_back({{0.25, 0, 0}, {0, 0, 0}, {}, SemanticGroup::Other, {}});
  g = voxelize(b, cfg);
  CHECK(g.cells.count({4, 0, 0}) == 1);
  CHECK(g.cells.count({3, 0, 0}) == 0);

  CHECK_THROWS_AS(voxelize(SemanticPointCloud{}, cfg), std::invalid_argument);
  cfg.voxel_size = 0.0;
  CHECK_THROWS_AS(voxelize(b, cfg), std::invalid_argument);
}

TEST_CASE("serialize_order") {
  VoxelGrid g;
  g.voxel_size = 1;
  g.cells[{0, 1, 0}] = {2};
  g.cells[{1, 0, 0}] = {1};
  g.cells[{0, 0, 0}] = {0};
  const auto o = serialize_order(g);
  REQUIRE(o.size() == 3);
  CHECK(o[0].coord == GridCoord{0, 0, 0});
  CHECK(o[1].coord == GridCoord{1, 0, 0});
  CHECK(o[2].coord == GridCoord{0, 1, 0});
  CHECK(o[0].morton == 0);
  CHECK(o[1].morton == 1);
  CHECK(o[2].morton == 2);

  VoxelGrid one;
  one.cells[{5, 5, 5}] = {0};
  CHECK(serialize_order(one).size() == 1);

  // Insertion order of the map does not matter.
  std::vector<GridCoord> coords;
  for (int i = 0; i < 50; ++i) coords.push_back({i % 7, i / 7, (i * 3) % 5});
  VoxelGrid a, b;
  for (const auto& c : coords) a.cells[c] = {0};
  std::shuffle(coords.begin(), coords.end(), std::mt19937_64(9));
  for (const auto& c : coords) b.cells[c] = {0};
  const auto oa = serialize_order(a), ob = serialize_order(b);
  REQUIRE(oa.size() == ob.size());
  for (std::size_t i = 0; i < oa.size(); ++i) CHECK(oa[i].coord == ob[i].coord);

  VoxelGrid far;
  far.cells[{kMaxGridCoord, 0, 0}] = {0};
  CHECK_THROWS_AS(serialize_order(far), std::out_of_range);
}

TEST_CASE("encode_tokens: shape, order, determinism, permutation invariance") {
  const auto cfg = small_cfg();
  const auto c = random_cloud(800, 2);
  const auto t = encode_tokens(c, cfg);
  CHECK(t.tokens.cols() == 12);
  CHECK(static_cast<std::size_t>(t.size()) == voxelize(c, cfg).cells.size());
  CHECK(std::adjacent_find(t.morton.begin(), t.morton.end(), std::greater_equal<>()) == t.morton.end());
  CHECK(t.tokens.allFinite());

  const auto again = encode_tokens(c, cfg);
  CHECK(again.tokens == t.tokens);

  auto shuffled = c;
  std::shuffle(shuffled.points.begin(), shuffled.points.end(), std::mt19937_64(4));
  const auto s = encode_tokens(shuffled, cfg);
  CHECK(s.size() == t.size());
  CHECK(s.tokens == t.tokens);
  CHECK(s.morton == t.morton);

  auto other = cfg;
  other.seed = 99;
  CHECK_FALSE(encode_tokens(c, other).tokens == t.tokens);

  auto wide = c;
  wide.d_raw = 4;
  CHECK_THROWS_AS(encode_tokens(wide, cfg), std::invalid_argument);
  CHECK_THROWS_AS(encode_tokens(SemanticPointCloud{}, cfg), std::invalid_argument);
}

TEST_CASE("nested voxel sizes never reduce the token count") {
  const auto c = random_cloud(2000, 5, 2.0);
  auto cfg = small_cfg();
  Eigen::Index prev = 0;
  for (double v : {0.4, 0.2, 0.1, 0.05, 0.025}) {
    cfg.voxel_size = v;
    const auto n = encode_tokens(c, cfg).size();
    CHECK(n >= prev);
    prev = n;
  }
}

TEST_CASE("a raw perturbation moves only its own voxel, and vanishingly") {
  const auto cfg = small_cfg();
  const auto c = random_cloud(500, 6);
  const auto base = encode_tokens(c, cfg);
  const std::size_t victim = 17;
  auto moved = c;
  moved.points[victim].raw[1] += 1e-6;
  const auto t = encode_tokens(moved, cfg);
  REQUIRE(t.size() == base.size());
  const auto g = voxelize(c, cfg);
  const Vec3 rel = c.points[victim].pos - g.origin;
  const GridCoord cell{static_cast<std::int64_t>(std::floor(rel.x / cfg.voxel_size)),
                       static_cast<std::int64_t>(std::floor(rel.y / cfg.voxel_size)),
                       static_cast<std::int64_t>(std::floor(rel.z / cfg.voxel_size))};
  int changed = 0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double d = (t.tokens.row(i) - base.tokens.row(i)).norm();
    if (t.coords[static_cast<std::size_t>(i)] == cell) {
      CHECK(d > 0.0);
      CHECK(d < 1e-4);
      ++changed;
    } else {
      CHECK(d == 0.0);
    }
  }
  CHECK(changed == 1);
}

TEST_CASE("class-filtered prototypes") {
  const auto cfg = small_cfg();
  const PointEncoder enc(cfg);
  auto c = random_cloud(600, 8);
  for (auto& p : c.points)
    if (p.gt_group == SemanticGroup::Wall) {
      p.gt_group = SemanticGroup::Other;
      p.color = {};
    }
  int forwards = 0;
  const auto wall = class_filtered_prototype(c, SemanticGroup::Wall, enc, &forwards);
  CHECK(wall.isZero(0.0));
  CHECK(wall.size() == 12);
  CHECK(forwards == 0);

  const auto furn = class_filtered_prototype(c, SemanticGroup::Furniture, enc, &forwards);
  CHECK(forwards == 1);
  CHECK(furn.allFinite());
  CHECK(furn.norm() > 0.0);
  const auto only = filter_by_color(c, SemanticGroup::Furniture);
  CHECK((furn - enc.encode(only).tokens.colwise().mean().transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(class_filtered_prototype(c, SemanticGroup::Other, enc), std::invalid_argument);

  const auto e = encode_scene(c, enc);
  CHECK(e.encoder_forwards == 3);
  CHECK(e.present == std::array<bool, 3>{true, false, true});

  const auto full = encode_scene(random_cloud(600, 9), enc);
  CHECK(full.encoder_forwards == 4);
  CHECK(full.present == std::array<bool, 3>{true, true, true});

  // Dimmed colors below one half drop out of the filtered forwards.
  const auto dim = encode_scene(scale_intensity(random_cloud(600, 9), 0.4), enc);
  CHECK(dim.encoder_forwards == 1);
  CHECK(dim.prototypes.isZero(0.0));
}
