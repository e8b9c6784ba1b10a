#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "semshift/core.hpp"
#include "semshift/tokenizer.hpp"

namespace semshift {

/// Fully connected layer y = W x + b with W stored out x in.
struct Dense {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

/// Two-layer perceptron with a tanh hidden layer and a linear output.
struct Mlp {
  Dense hidden;
  Dense out;

  Eigen::Index in_width() const { return hidden.w.cols(); }
  Eigen::Index out_width() const { return out.w.rows(); }
};

struct LossWeights {
  double ratio = 0.1;
  double budget = 0.1;
  double ent = 0.01;
};

struct ShiftConfig {
  int channels = 96;
  int router_hidden = 64;
  int delta_hidden = 64;
  int aux_hidden = 16;
  double alpha = 1.0;
  LossWeights weights;
  double epsilon = 1e-8;
  /// When set, groups absent from the scene inject nothing instead of softplus(phi_k(0)).
  bool zero_empty_deltas = false;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Trainable parameters of the routed shift: router r, per-group delta heads phi_k writing
/// into disjoint channel blocks, and the auxiliary ratio head g. Alpha is a fixed scale.
struct ShiftParams {
  Mlp router;                // C -> 3
  std::array<Mlp, 3> delta;  // C -> C/3, softplus applied outside the MLP
  Mlp aux;                   // 6 -> 3
  double alpha = 1.0;
  bool zero_empty_deltas = false;

  static ShiftParams initialize(const ShiftConfig& cfg);

  /// Same shapes, every entry zero.
  ShiftParams zeros_like() const;

  Eigen::Index channels() const { return router.in_width(); }
  Eigen::Index block() const { return channels() / 3; }
  std::size_t parameter_count() const;

  /// Visits every trainable tensor as (name, Eigen matrix or vector).
  template <typename F>
  void for_each_tensor(F&& f) {
    visit_mlp("router", router, f);
    static constexpr std::array<const char*, 3> names{"delta.furniture", "delta.wall",
                                                      "delta.opening"};
    for (std::size_t k = 0; k < 3; ++k) visit_mlp(names[k], delta[k], f);
    visit_mlp("aux", aux, f);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<ShiftParams*>(this)->for_each_tensor(
        [&f](const std::string& name, const auto& t) { f(name, t); });
  }

  /// this += scale * other (shapes must match).
  void axpy(double scale, const ShiftParams& other);

 private:
  template <typename F>
  static void visit_mlp(const std::string& prefix, Mlp& m, F& f) {
    f(prefix + ".hidden.w", m.hidden.w);
    f(prefix + ".hidden.b", m.hidden.b);
    f(prefix + ".out.w", m.out.w);
    f(prefix + ".out.b", m.out.b);
  }
};

/// N x 3 routing matrix with rows on the probability simplex.
struct RoutingWeights {
  Eigen::MatrixXd w;
};

RoutingWeights route(const Eigen::MatrixXd& tokens, const ShiftParams& params);
inline RoutingWeights route(const TokenSequence& tokens, const ShiftParams& params) {
  return route(tokens.tokens, params);
}

/// 3 x C matrix; row k is softplus(phi_k(p_k)) on block k and zero elsewhere.
/// present[k] only matters when params.zero_empty_deltas is set.
Eigen::MatrixXd class_deltas(const Eigen::MatrixXd& prototypes, const ShiftParams& params,
                             std::array<bool, 3> present = {true, true, true});

/// h_i + alpha * sum_k w_ik delta_k; positions and codes are carried over unchanged.
TokenSequence fuse(const TokenSequence& tokens, const RoutingWeights& w,
                   const Eigen::MatrixXd& deltas, double alpha);

struct AuxPrediction {
  Eigen::Matrix<double, 6, 1> stats;  // block means then block l2 norms
  Eigen::Vector3d p_hat;
};

AuxPrediction aux_predict(const Eigen::MatrixXd& deltas, const ShiftParams& params);

/// Normalized (furniture, wall, opening) color counts; empty when no point is foreground.
std::optional<Eigen::Vector3d> empirical_ratio(const SemanticPointCloud& cloud);

struct LossBreakdown {
  double l_ratio = 0.0;
  double l_budget = 0.0;
  double l_ent = 0.0;
  double total = 0.0;
  LossWeights weights;
  double epsilon = 1e-8;
  /// Set when p_hat has an exact zero where p_gt is positive (l_ratio is +inf then).
  bool ratio_infinite = false;
};

/// Regularizer terms for one scene; all three are zero when p_gt is absent.
LossBreakdown losses(const std::optional<Eigen::Vector3d>& p_gt, const Eigen::Vector3d& p_hat,
                     const RoutingWeights& w, const LossWeights& weights, double epsilon);

/// What the objective needs from one scene. The encoder is frozen, so these are fixed.
struct ShiftSample {
  Eigen::MatrixXd tokens;      // N x C
  Eigen::MatrixXd prototypes;  // 3 x C
  std::array<bool, 3> present{true, true, true};
  std::optional<Eigen::Vector3d> p_gt;
};

ShiftSample make_sample(const SceneEncoding& enc, const SemanticPointCloud& cloud);

struct ObjectiveValue {
  LossBreakdown loss;  // batch means
  ShiftParams grad;
};

/// Batch-mean loss. Scenes without foreground contribute zero to the mean.
LossBreakdown objective(std::span<const ShiftSample* const> batch, const ShiftParams& params,
                        const LossWeights& weights, double epsilon);
LossBreakdown objective(std::span<const ShiftSample> batch, const ShiftParams& params,
                        const LossWeights& weights, double epsilon);

/// Batch-mean loss with its exact reverse-mode gradient.
/// Throws std::invalid_argument when no scene has foreground points.
ObjectiveValue objective_and_grad(std::span<const ShiftSample* const> batch,
                                  const ShiftParams& params, const LossWeights& weights,
                                  double epsilon);
ObjectiveValue objective_and_grad(std::span<const ShiftSample> batch, const ShiftParams& params,
                                  const LossWeights& weights, double epsilon);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainStepResult {
  LossBreakdown loss;  // evaluated before the update
  double grad_norm = 0.0;
};

/// One plain gradient-descent step. Throws TrainingDiverged on a non-finite loss.
TrainStepResult train_step(std::span<const ShiftSample* const> batch, ShiftParams& params,
                           double lr, const LossWeights& weights, double epsilon);
TrainStepResult train_step(std::span<const ShiftSample> batch, ShiftParams& params, double lr,
                           const LossWeights& weights, double epsilon);

struct GradientCheck {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst;  // tensor[index] with the largest relative error
  std::size_t checked = 0;
};

/// Central differences of objective() against objective_and_grad() over every parameter.
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradientCheck check_gradient(std::span<const ShiftSample> batch, const ShiftParams& params,
                             const LossWeights& weights, double epsilon, double step = 1e-5,
                             double floor = 1e-8);

}  // namespace semshift
