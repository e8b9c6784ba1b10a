#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "semshift/decoder.hpp"

using namespace semshift;

namespace {

constexpr double kVoxel = 0.05;

struct Builder {
  TokenSequence tokens;
  std::vector<std::array<double, 3>> rows;

  void add(GridCoord c, SemanticGroup g) {
    tokens.coords.push_back(c);
    tokens.positions.push_back({(static_cast<double>(c.x) + 0.5) * kVoxel, (static_cast<double>(c.y) + 0.5) * kVoxel,
                                (static_cast<double>(c.z) + 0.5) * kVoxel});
    tokens.morton.push_back(tokens.morton.size());
    std::array<double, 3> r{0.1, 0.1, 0.1};
    if (g != SemanticGroup::Other) r[static_cast<std::size_t>(foreground_index(g))] = 0.8;
    rows.push_back(r);
  }
  RoutingWeights routing() const {
    RoutingWeights w{Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), 3)};
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int k = 0; k < 3; ++k) w.w(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
    return w;
  }
  TokenSequence seq() {
    tokens.tokens = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), 6);
    tokens.voxel_size = kVoxel;
    return tokens;
  }
};

// Fills an axis-aligned block of cells [x0,x1) x [y0,y1) x [z0,z1).
void block(Builder& b, int x0, int x1, int y0, int y1, int z0, int z1, SemanticGroup g) {
  for (int x = x0; x < x1; ++x)
    for (int y = y0; y < y1; ++y)
      for (int z = z0; z < z1; ++z) b.add({x, y, z}, g);
}

double angle_between(const WallSegment& a, const WallSegment& b) {
  const double ax = a.b.x - a.a.x, ay = a.b.y - a.a.y, bx = b.b.x - b.a.x, by = b.b.y - b.a.y;
  return std::acos(std::abs(ax * bx + ay * by) / (std::hypot(ax, ay) * std::hypot(bx, by)));
}

}  // namespace

TEST_CASE("config validation") {
  DecoderConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.route_threshold = 1.0 / 3.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.route_threshold = 1.0;
  CHECK_NOTHROW(cfg.validate());
  cfg.min_cluster = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("label_tokens") {
  RoutingWeights w{Eigen::MatrixXd(3, 3)};
  w.w << 0.5, 0.25, 0.25, 0.4, 0.35, 0.25, 0.1, 0.1, 0.8;
  const auto l = label_tokens(w, DecoderConfig{});
  CHECK(l == std::vector<SemanticGroup>{SemanticGroup::Furniture, SemanticGroup::Other, SemanticGroup::Opening});
}

TEST_CASE("voxel_components under the Chebyshev radius") {
  const std::vector<GridCoord> cells{{0, 0, 0}, {2, 2, 2}, {5, 0, 0}, {3, 0, 0}, {10, 10, 10}};
  const auto c = voxel_components(cells, 2);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(c[1] == std::vector<std::size_t>{4});
  CHECK(voxel_components(cells, 1).size() == 5);
}

TEST_CASE("fit_oriented_box") {
  const std::vector<Vec3> square{{0, 0, 0}, {1, 0, 0}, {1, 1, 1}, {0, 1, 1}};
  const auto a = fit_oriented_box(square, 0.025);
  CHECK(a.yaw == 0.0);
  CHECK(a.size.x == doctest::Approx(1.05));
  CHECK(a.size.y == doctest::Approx(1.05));
  CHECK(a.center.x == doctest::Approx(0.5));

  std::vector<Vec3> diamond;
  for (const auto& p : square) {
    const double c = std::cos(kPi / 4), s = std::sin(kPi / 4);
    diamond.push_back({c * p.x - s * p.y, s * p.x + c * p.y, p.z});
  }
  const auto d = fit_oriented_box(diamond, 0.0);
  // The square has quarter-turn symmetry, so pi/4 and -pi/4 name the same footprint.
  CHECK(std::abs(std::abs(d.yaw) - kPi / 4) < 1e-6);
  CHECK(d.size.x == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(fit_oriented_box(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(fit_oriented_box(std::vector<Vec3>{{0, 0, 0}, {1, 1, 0}, {2, 2, 0}, {3, 3, 1}}),
                  std::invalid_argument);
}

TEST_CASE("fit_oriented_box yaw matches an eigenvector oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const double yaw = 1.5 * u(rng);
    std::vector<Vec3> pts;
    for (int i = 0; i < 60; ++i) {
      const double lx = 1.2 * u(rng), ly = 0.4 * u(rng);
      pts.push_back({std::cos(yaw) * lx - std::sin(yaw) * ly + 3, std::sin(yaw) * lx + std::cos(yaw) * ly - 1,
                     0.5 + 0.3 * u(rng)});
    }
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : pts) mean += Eigen::Vector2d(p.x, p.y);
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& p : pts) {
      const Eigen::Vector2d d = Eigen::Vector2d(p.x, p.y) - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    const Eigen::Vector2d major = es.eigenvectors().col(1);
    double expect = std::atan2(major.y(), major.x());
    expect = std::remainder(expect, kPi);  // direction sign is arbitrary
    const auto b = fit_oriented_box(pts, 0.0);
    const double diff = std::remainder(b.yaw - expect, kPi);
    CHECK(std::abs(diff) < 1e-9);
    CHECK(b.yaw >= -kPi / 2);
    CHECK(b.yaw < kPi / 2);
    // Every input point lies in the box.
    for (const auto& p : pts) {
      const double dx = p.x - b.center.x, dy = p.y - b.center.y;
      const double lx = std::cos(b.yaw) * dx + std::sin(b.yaw) * dy;
      const double ly = -std::sin(b.yaw) * dx + std::cos(b.yaw) * dy;
      CHECK(std::abs(lx) <= b.size.x / 2 + 1e-9);
      CHECK(std::abs(ly) <= b.size.y / 2 + 1e-9);
    }
  }
}

TEST_CASE("fit_wall_segments") {
  DecoderConfig cfg;
  std::vector<Vec3> one;
  for (double x = 0.025; x < 4.0; x += 0.05)
    for (double z = 0.025; z < 2.5; z += 0.05) one.push_back({x, 0.025, z});
  const auto w = fit_wall_segments(one, cfg);
  REQUIRE(w.size() == 1);
  const double tol = 2 * cfg.voxel_size;
  const bool forward = w[0].a.x < w[0].b.x;
  const Vec3 a = forward ? w[0].a : w[0].b, b = forward ? w[0].b : w[0].a;
  CHECK(std::abs(a.x - 0.0) <= tol);
  CHECK(std::abs(b.x - 4.0) <= tol);
  CHECK(std::abs(a.y - 0.025) <= tol);
  CHECK(std::abs(w[0].height - 2.5) <= tol);

  auto two = one;
  for (double y = 0.075; y < 3.0; y += 0.05)
    for (double z = 0.025; z < 2.5; z += 0.05) two.push_back({0.025, y, z});
  const auto ww = fit_wall_segments(two, cfg);
  REQUIRE(ww.size() == 2);
  CHECK(std::abs(angle_between(ww[0], ww[1]) - kPi / 2) <= 2.0 * kPi / 180.0);

  CHECK(fit_wall_segments(std::vector<Vec3>(one.begin(), one.begin() + 3), cfg).empty());
}

TEST_CASE("fit_openings: door, window, no wall") {
  DecoderConfig cfg;
  const std::vector<WallSegment> walls{{{0, 0, 0}, {4, 0, 0}, 2.5, 0.1}};
  std::vector<Vec3> door, window;
  for (double x = 1.0; x < 1.8; x += 0.05)
    for (double z = 0.025; z < 2.0; z += 0.05) door.push_back({x, 0.0, z});
  for (double x = 2.5; x < 3.5; x += 0.05)
    for (double z = 1.0; z <= 2.0; z += 0.05) window.push_back({x, 0.0, z});
  const auto d = fit_openings(door, walls, cfg);
  REQUIRE(d.size() == 1);
  CHECK(d[0].kind == OpeningKind::Door);
  CHECK(d[0].wall_index == 0);
  const auto w = fit_openings(window, walls, cfg);
  REQUIRE(w.size() == 1);
  CHECK(w[0].kind == OpeningKind::Window);
  CHECK(w[0].center.z == doctest::Approx(1.5).epsilon(0.02));
  CHECK(fit_openings(door, std::vector<WallSegment>{}, cfg).empty());
  // Too far from the only wall.
  auto far = door;
  for (auto& p : far) p.y = 1.0;
  CHECK(fit_openings(far, walls, cfg).empty());
}

TEST_CASE("decode examples") {
  DecoderConfig cfg;
  {
    Builder b;
    block(b, 0, 4, 0, 4, 0, 4, SemanticGroup::Other);
    const auto seq = b.seq();
    CHECK(decode(seq, b.routing(), cfg).empty());
  }
  {
    Builder b;
    block(b, 10, 15, 10, 14, 0, 1, SemanticGroup::Furniture);  // 20 tokens
    block(b, 0, 3, 0, 3, 0, 3, SemanticGroup::Other);
    const auto seq = b.seq();
    const auto s = decode(seq, b.routing(), cfg);
    REQUIRE(s.boxes.size() == 1);
    CHECK(s.walls.empty());
    CHECK(s.openings.empty());
    CHECK(s.boxes[0].center.x == doctest::Approx(0.625));
    CHECK(validate_scene(s).empty());
  }
  {
    Builder b;
    block(b, 0, 3, 0, 3, 0, 2, SemanticGroup::Furniture);
    block(b, 6, 9, 0, 3, 0, 2, SemanticGroup::Furniture);  // gap of 3 cells > radius 2
    const auto seq = b.seq();
    const auto s = decode(seq, b.routing(), cfg);
    CHECK(s.boxes.size() == 2);
    CHECK(decode(seq, b.routing(), cfg) == s);
  }
  Builder b;
  block(b, 0, 2, 0, 2, 0, 1, SemanticGroup::Furniture);
  const auto seq = b.seq();
  CHECK_THROWS_AS(decode(seq, RoutingWeights{Eigen::MatrixXd::Zero(2, 3)}, cfg), std::invalid_argument);
}

TEST_CASE("removing red-routed tokens never adds boxes; outputs validate") {
  std::mt19937_64 rng(8);
  DecoderConfig cfg;
  for (int t = 0; t < 50; ++t) {
    Builder b;
    for (int i = 0; i < 400; ++i) {
      const GridCoord c{static_cast<std::int64_t>(rng() % 40), static_cast<std::int64_t>(rng() % 40),
                        static_cast<std::int64_t>(rng() % 20)};
      b.add(c, static_cast<SemanticGroup>(rng() % 4));
    }
    // Dedupe cells so tokens stay one per voxel.
    Builder u;
    std::unordered_map<GridCoord, int, GridCoordHash> seen;
    for (std::size_t i = 0; i < b.tokens.coords.size(); ++i) {
      if (seen.emplace(b.tokens.coords[i], 1).second) {
        u.add(b.tokens.coords[i], SemanticGroup::Other);
        u.rows.back() = b.rows[i];
      }
    }
    const auto seq = u.seq();
    const auto w = u.routing();
    const auto full = decode(seq, w, cfg);
    CHECK(validate_scene(full).empty());
    auto cleared = w;
    for (Eigen::Index i = 0; i < cleared.w.rows(); ++i)
      if (cleared.w(i, 0) >= cfg.route_threshold) cleared.w.row(i) << 0.2, 0.4, 0.4;
    const auto less = decode(seq, cleared, cfg);
    CHECK(less.boxes.empty());
    CHECK(less.boxes.size() <= full.boxes.size());
    CHECK(validate_scene(less).empty());
  }
}
