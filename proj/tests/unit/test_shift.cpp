#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "semshift/lift.hpp"
#include "semshift/shift.hpp"

using namespace semshift;

namespace {

ShiftConfig small_config(int c = 6, std::uint64_t seed = 3) {
  ShiftConfig cfg;
  cfg.channels = c;
  cfg.seed = seed;
  return cfg;
}

TokenSequence tokens_of(const Eigen::MatrixXd& m) {
  TokenSequence t;
  t.tokens = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    t.positions.push_back({double(i), 0, 0});
    t.morton.push_back(static_cast<std::uint64_t>(i));
    t.coords.push_back({i, 0, 0});
  }
  return t;
}

SemanticPointCloud cloud_with_counts(int f, int w, int o, int other) {
  SemanticPointCloud c;
  auto add = [&](int n, SemanticColor col) {
    for (int i = 0; i < n; ++i) c.points.push_back({{double(i), 0, 0}, {0, 0, 0}, col, SemanticGroup::Other, {}});
  };
  add(f, {1, 0, 0});
  add(w, {0, 1, 0});
  add(o, {0, 0, 1});
  add(other, {0, 0, 0});
  return c;
}

}  // namespace

TEST_CASE("parameter count stays under the budget at default sizes") {
  const auto p = ShiftParams::initialize(ShiftConfig{});
  CHECK(p.parameter_count() <= 250000);
  // router 96*64+64+64*3+3, three heads 96*64+64+64*32+32, aux 6*16+16+16*3+3
  CHECK(p.parameter_count() == (6144 + 64 + 192 + 3) + 3 * (6144 + 64 + 2048 + 32) + (96 + 16 + 48 + 3));
}

TEST_CASE("route: zero logits give uniform weights, shifts do not matter") {
  auto p = ShiftParams::initialize(small_config());
  p.router.out.w.setZero();
  p.router.out.b.setZero();
  Eigen::MatrixXd h = Eigen::MatrixXd::Random(5, 6);
  const auto w = route(h, p);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (int k = 0; k < 3; ++k) CHECK(w.w(i, k) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  p.router.out.b = Eigen::Vector3d(0.0, 0.7, 1.4);
  const auto a = route(h, p);
  p.router.out.b = Eigen::Vector3d(5.0, 5.7, 6.4);
  const auto b = route(h, p);
  CHECK((a.w - b.w).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(route(Eigen::MatrixXd::Zero(2, 9), p), std::invalid_argument);
}

TEST_CASE("class deltas are nonnegative and block-disjoint") {
  std::mt19937_64 rng(5);
  const auto p = ShiftParams::initialize(small_config(12));
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd protos = Eigen::MatrixXd::Random(3, 12) * 4.0;
    const auto d = class_deltas(protos, p);
    CHECK(d.minCoeff() >= 0.0);
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 3; ++j)
        if (k != j) CHECK((d.row(k).array() * d.row(j).array()).cwiseAbs().maxCoeff() == 0.0);
    for (int k = 0; k < 3; ++k)
      for (Eigen::Index c = 0; c < 12; ++c)
        if (c / 4 != k) CHECK(d(k, c) == 0.0);
  }
  // Empty prototype: softplus(phi(0)), finite and in-block; zeroed only when asked.
  const auto d0 = class_deltas(Eigen::MatrixXd::Zero(3, 12), p, {true, false, true});
  CHECK(d0.row(1).segment(4, 4).minCoeff() > 0.0);
  auto pz = p;
  pz.zero_empty_deltas = true;
  const auto dz = class_deltas(Eigen::MatrixXd::Zero(3, 12), pz, {true, false, true});
  CHECK(dz.row(1).isZero(0.0));
  CHECK(dz.row(0).segment(0, 4).minCoeff() > 0.0);
}

TEST_CASE("fuse: alpha 0 is exact, one-hot routing adds the matching delta") {
  const auto p = ShiftParams::initialize(small_config());
  Eigen::MatrixXd h = Eigen::MatrixXd::Random(4, 6);
  const auto toks = tokens_of(h);
  const auto deltas = class_deltas(Eigen::MatrixXd::Random(3, 6), p);
  const auto w = route(toks, p);
  const auto same = fuse(toks, w, deltas, 0.0);
  CHECK(same.tokens == toks.tokens);
  CHECK(same.morton == toks.morton);

  RoutingWeights onehot{Eigen::MatrixXd::Zero(4, 3)};
  onehot.w.col(1).setOnes();
  const auto f = fuse(toks, onehot, deltas, 0.5);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const Eigen::RowVectorXd expect = h.row(i) + 0.5 * deltas.row(1);
    CHECK((f.tokens.row(i) - expect).cwiseAbs().maxCoeff() < 1e-15);
    // Only the wall block moved.
    CHECK((f.tokens.row(i).segment(0, 2) - h.row(i).segment(0, 2)).isZero(0.0));
    CHECK((f.tokens.row(i).segment(4, 2) - h.row(i).segment(4, 2)).isZero(0.0));
  }
  CHECK_THROWS_AS(fuse(toks, RoutingWeights{Eigen::MatrixXd::Zero(3, 3)}, deltas, 1.0), std::invalid_argument);
}

TEST_CASE("aux statistics: block means and norms") {
  const auto p = ShiftParams::initialize(small_config(96));
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 96);
  const auto zero = aux_predict(d, p);
  CHECK(zero.stats.isZero(0.0));
  CHECK(zero.p_hat.sum() == doctest::Approx(1.0).epsilon(1e-12));
  d.row(2).segment(64, 32).setConstant(2.0);
  const auto a = aux_predict(d, p);
  CHECK(a.stats[2] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(a.stats[5] == doctest::Approx(2.0 * std::sqrt(32.0)).epsilon(1e-14));
  CHECK(std::abs(a.p_hat.sum() - 1.0) < 1e-9);
}

TEST_CASE("empirical ratio from pure colors") {
  const auto r = empirical_ratio(cloud_with_counts(50, 30, 20, 7));
  REQUIRE(r);
  CHECK((*r - Eigen::Vector3d(0.5, 0.3, 0.2)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_FALSE(empirical_ratio(cloud_with_counts(0, 0, 0, 12)));
  const auto o = empirical_ratio(cloud_with_counts(0, 0, 10, 0));
  REQUIRE(o);
  CHECK(*o == Eigen::Vector3d(0, 0, 1));
}

TEST_CASE("losses: identities and hand values") {
  const LossWeights lw{0.1, 0.1, 0.01};
  const Eigen::Vector3d p(0.5, 0.3, 0.2);
  RoutingWeights w{Eigen::MatrixXd(2, 3)};
  w.w << 0.6, 0.2, 0.2, 0.4, 0.4, 0.2;  // column mean (0.5, 0.3, 0.2)
  const auto l = losses(p, p, w, lw, 1e-8);
  CHECK(l.l_ratio == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(l.l_budget < 1e-30);
  const double h1 = -(0.6 * std::log(0.6) + 0.4 * std::log(0.2));
  const double h2 = -(0.8 * std::log(0.4) + 0.2 * std::log(0.2));
  CHECK(l.l_ent == doctest::Approx((h1 + h2) / 2).epsilon(1e-7));
  CHECK(l.total == doctest::Approx(lw.ratio * l.l_ratio + lw.budget * l.l_budget - lw.ent * l.l_ent).epsilon(1e-15));

  RoutingWeights u{Eigen::MatrixXd::Constant(4, 3, 1.0 / 3.0)};
  const auto lu = losses(p, p, u, lw, 1e-8);
  CHECK(std::abs(lu.l_ent - std::log(3.0)) < 1e-7);

  // KL with a zero in p_gt and a hand-computed value.
  const Eigen::Vector3d q(0.25, 0.5, 0.25);
  const Eigen::Vector3d pz(0.5, 0.5, 0.0);
  const auto lk = losses(pz, q, u, lw, 1e-8);
  CHECK(lk.l_ratio == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));

  // Exact zero in p_hat where p_gt is positive: flagged, not thrown.
  const auto li = losses(p, Eigen::Vector3d(0.5, 0.5, 0.0), u, lw, 1e-8);
  CHECK(li.ratio_infinite);
  CHECK(std::isinf(li.l_ratio));

  const auto skip = losses(std::nullopt, q, u, lw, 1e-8);
  CHECK(skip.l_ratio == 0.0);
  CHECK(skip.l_budget == 0.0);
  CHECK(skip.l_ent == 0.0);
}

TEST_CASE("hand-written forward agrees with the library objective") {
  std::mt19937_64 rng(11);
  const auto p = ShiftParams::initialize(small_config());
  std::vector<ShiftSample> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(oracle::random_sample(8, 6, rng));
  const LossWeights lw{0.1, 0.1, 0.01};
  const double lib = objective(std::span<const ShiftSample>(batch), p, lw, 1e-8).total;
  const double ref = oracle::ForwardOracle::total(batch, p, lw, 1e-8);
  CHECK(std::abs(lib - ref) < 1e-13);
}

TEST_CASE("analytic gradient vs central differences") {
  const LossWeights lw{0.1, 0.1, 0.01};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto p = ShiftParams::initialize(small_config(6, seed + 1));
    std::vector<ShiftSample> batch{oracle::random_sample(8, 6, rng), oracle::random_sample(8, 6, rng)};
    const auto r = oracle::fd_check(batch, p, lw, 1e-8, 1e-5, 1e-6);
    // Worst observed over these seeds is about 1.6e-6.
    CHECK(r.max_rel < 1e-5);
    // The library's own verifier agrees.
    const auto own = check_gradient(batch, p, lw, 1e-8, 1e-5, 1e-6);
    CHECK(own.max_rel_error < 1e-5);
    CHECK(own.checked == p.parameter_count());
  }
  SUBCASE("zero_empty_deltas path") {
    std::mt19937_64 rng(99);
    auto cfg = small_config(6, 7);
    cfg.zero_empty_deltas = true;
    auto p = ShiftParams::initialize(cfg);
    auto s = oracle::random_sample(8, 6, rng);
    s.present = {true, false, true};
    std::vector<ShiftSample> batch{s};
    CHECK(oracle::fd_check(batch, p, lw, 1e-8, 1e-5, 1e-6).max_rel < 1e-5);
  }
}

TEST_CASE("gradient structure under switched-off terms") {
  std::mt19937_64 rng(4);
  const auto p = ShiftParams::initialize(small_config());
  std::vector<ShiftSample> batch{oracle::random_sample(8, 6, rng)};
  const auto g = objective_and_grad(std::span<const ShiftSample>(batch), p, {0.0, 0.1, 0.01}, 1e-8).grad;
  CHECK(g.aux.hidden.w.isZero(0.0));
  CHECK(g.aux.out.b.isZero(0.0));
  for (const auto& d : g.delta) CHECK(d.out.w.isZero(0.0));

  // Entropy only: the router gradient is that of -lambda_e * entropy, checked by differences.
  const LossWeights ent_only{0.0, 0.0, 0.01};
  CHECK(oracle::fd_check(batch, p, ent_only, 1e-8, 1e-5, 1e-6).max_rel < 1e-5);

  // Scenes without foreground contribute nothing; a batch of only those is an error.
  ShiftSample empty = batch[0];
  empty.p_gt.reset();
  std::vector<ShiftSample> none{empty};
  CHECK_THROWS_AS(objective_and_grad(std::span<const ShiftSample>(none), p, ent_only, 1e-8), std::invalid_argument);
  std::vector<ShiftSample> mixed{batch[0], empty};
  const auto half = objective(std::span<const ShiftSample>(mixed), p, {0.1, 0.1, 0.01}, 1e-8);
  const auto full = objective(std::span<const ShiftSample>(batch), p, {0.1, 0.1, 0.01}, 1e-8);
  CHECK(half.total == doctest::Approx(full.total / 2).epsilon(1e-14));
}

TEST_CASE("train_step: lr 0 is a no-op, runs are deterministic, loss goes down") {
  std::mt19937_64 rng(21);
  std::vector<ShiftSample> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(oracle::random_sample(40, 12, rng));
  const LossWeights lw{0.1, 0.1, 0.01};
  const auto init = ShiftParams::initialize(small_config(12, 9));

  auto same = init;
  train_step(std::span<const ShiftSample>(batch), same, 0.0, lw, 1e-8);
  bool unchanged = true;
  std::vector<double> a, b;
  init.for_each_tensor([&](const std::string&, const auto& t) { a.insert(a.end(), t.data(), t.data() + t.size()); });
  same.for_each_tensor([&](const std::string&, const auto& t) { b.insert(b.end(), t.data(), t.data() + t.size()); });
  unchanged = a == b;
  CHECK(unchanged);

  auto run = [&]() {
    auto p = init;
    std::vector<double> totals;
    for (int s = 0; s < 200; ++s)
      totals.push_back(train_step(std::span<const ShiftSample>(batch), p, 0.5, lw, 1e-8).loss.total);
    return std::make_pair(p, totals);
  };
  const auto [p1, t1] = run();
  const auto [p2, t2] = run();
  CHECK(t1 == t2);
  std::vector<double> x1, x2;
  p1.for_each_tensor([&](const std::string&, const auto& t) { x1.insert(x1.end(), t.data(), t.data() + t.size()); });
  p2.for_each_tensor([&](const std::string&, const auto& t) { x2.insert(x2.end(), t.data(), t.data() + t.size()); });
  CHECK(x1 == x2);
  // Non-increasing over every 50-step window.
  for (std::size_t s = 0; s + 50 < t1.size(); ++s) CHECK(t1[s + 50] <= t1[s] + 1e-15);

  auto bad = init;
  CHECK_THROWS_AS(train_step(std::span<const ShiftSample>(batch), bad, -1.0, lw, 1e-8), std::invalid_argument);
  auto nan_batch = batch;
  nan_batch[0].tokens(0, 0) = std::nan("");
  CHECK_THROWS_AS(train_step(std::span<const ShiftSample>(nan_batch), bad, 0.1, lw, 1e-8), TrainingDiverged);
}
