#include "semshift/shift.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <vector>

#include "semshift/lift.hpp"
#include "semshift/rng.hpp"

namespace semshift {

void ShiftConfig::validate() const {
  if (channels <= 0 || channels % 3 != 0)
    throw std::invalid_argument("ShiftConfig: channels must be a positive multiple of 3");
  if (router_hidden <= 0 || delta_hidden <= 0 || aux_hidden <= 0)
    throw std::invalid_argument("ShiftConfig: hidden widths must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("ShiftConfig: alpha must be finite and >= 0");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("ShiftConfig: epsilon must be >= 0");
}

namespace {

Mlp make_mlp(int in, int hidden, int out, Rng& rng) {
  Mlp m;
  m.hidden.w.resize(hidden, in);
  m.hidden.b = Eigen::VectorXd::Zero(hidden);
  m.out.w.resize(out, hidden);
  m.out.b = Eigen::VectorXd::Zero(out);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index i = 0; i < m.hidden.w.size(); ++i) m.hidden.w.data()[i] = s1 * rng.normal();
  for (Eigen::Index i = 0; i < m.out.w.size(); ++i) m.out.w.data()[i] = s2 * rng.normal();
  return m;
}

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Router activations: 1 - 2 / (exp(2x) + 1) vectorizes, std::tanh does not.
// Agrees with std::tanh to a few ulp and saturates cleanly at +-1.
void tanh_inplace(Eigen::MatrixXd& x) {
  x = (1.0 - 2.0 / ((2.0 * x.array()).exp() + 1.0)).matrix();
}

Eigen::Vector3d softmax3(const Eigen::Vector3d& q) {
  const Eigen::Vector3d e = (q.array() - q.maxCoeff()).exp();
  return e / e.sum();
}

void softmax_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

void check_router_width(Eigen::Index cols, const ShiftParams& params) {
  if (cols != params.channels())
    throw std::invalid_argument("shift: token width " + std::to_string(cols) +
                                " does not match parameters (" +
                                std::to_string(params.channels()) + ")");
}

// Forward caches for one delta head.
struct DeltaForward {
  Eigen::VectorXd hidden;  // tanh activations
  Eigen::VectorXd pre;     // pre-softplus output
  Eigen::VectorXd delta;   // softplus(pre), or zeros when suppressed
  bool active = true;
};

DeltaForward delta_forward(const Mlp& head, const Eigen::VectorXd& proto, bool active) {
  DeltaForward f;
  f.hidden = (head.hidden.w * proto + head.hidden.b).array().tanh().matrix();
  f.pre = head.out.w * f.hidden + head.out.b;
  f.active = active;
  f.delta = active ? f.pre.unaryExpr(&softplus).eval() : Eigen::VectorXd::Zero(f.pre.size());
  return f;
}

struct AuxForward {
  Eigen::Matrix<double, 6, 1> stats;
  Eigen::VectorXd hidden;
  Eigen::Vector3d p_hat;
};

AuxForward aux_forward(const std::array<DeltaForward, 3>& heads, const Mlp& aux) {
  AuxForward f;
  for (int k = 0; k < 3; ++k) {
    const auto& d = heads[static_cast<std::size_t>(k)].delta;
    f.stats[k] = d.mean();
    f.stats[3 + k] = d.norm();
  }
  f.hidden = (aux.hidden.w * f.stats + aux.hidden.b).array().tanh().matrix();
  f.p_hat = softmax3(aux.out.w * f.hidden + aux.out.b);
  return f;
}

std::array<DeltaForward, 3> deltas_forward(const Eigen::MatrixXd& prototypes,
                                           const ShiftParams& params,
                                           const std::array<bool, 3>& present) {
  if (prototypes.rows() != 3) throw std::invalid_argument("shift: expected 3 prototypes");
  check_router_width(prototypes.cols(), params);
  std::array<DeltaForward, 3> out;
  for (std::size_t k = 0; k < 3; ++k) {
    const bool active = !params.zero_empty_deltas || present[k];
    out[k] = delta_forward(params.delta[k],
                           prototypes.row(static_cast<Eigen::Index>(k)).transpose(), active);
  }
  return out;
}

double entropy_term(const Eigen::MatrixXd& w, double epsilon) {
  if (w.rows() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index k = 0; k < 3; ++k) acc -= w(i, k) * std::log(w(i, k) + epsilon);
  return acc / static_cast<double>(w.rows());
}

}  // namespace

ShiftParams ShiftParams::initialize(const ShiftConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, 0x736866));
  ShiftParams p;
  p.router = make_mlp(cfg.channels, cfg.router_hidden, 3, rng);
  for (auto& head : p.delta) head = make_mlp(cfg.channels, cfg.delta_hidden, cfg.channels / 3, rng);
  p.aux = make_mlp(6, cfg.aux_hidden, 3, rng);
  p.alpha = cfg.alpha;
  p.zero_empty_deltas = cfg.zero_empty_deltas;
  return p;
}

ShiftParams ShiftParams::zeros_like() const {
  ShiftParams z = *this;
  z.for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
  return z;
}

std::size_t ShiftParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&n](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

void ShiftParams::axpy(double scale, const ShiftParams& other) {
  auto apply = [scale](Mlp& dst, const Mlp& src) {
    dst.hidden.w += scale * src.hidden.w;
    dst.hidden.b += scale * src.hidden.b;
    dst.out.w += scale * src.out.w;
    dst.out.b += scale * src.out.b;
  };
  apply(router, other.router);
  for (std::size_t k = 0; k < 3; ++k) apply(delta[k], other.delta[k]);
  apply(aux, other.aux);
}

RoutingWeights route(const Eigen::MatrixXd& tokens, const ShiftParams& params) {
  check_router_width(tokens.cols(), params);
  const Mlp& r = params.router;
  Eigen::MatrixXd hidden = (tokens * r.hidden.w.transpose()).rowwise() + r.hidden.b.transpose();
  tanh_inplace(hidden);
  RoutingWeights out;
  out.w = (hidden * r.out.w.transpose()).rowwise() + r.out.b.transpose();
  softmax_rows(out.w);
  return out;
}

Eigen::MatrixXd class_deltas(const Eigen::MatrixXd& prototypes, const ShiftParams& params,
                             std::array<bool, 3> present) {
  const auto heads = deltas_forward(prototypes, params, present);
  const Eigen::Index m = params.block();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(3, params.channels());
  for (Eigen::Index k = 0; k < 3; ++k)
    out.row(k).segment(k * m, m) = heads[static_cast<std::size_t>(k)].delta.transpose();
  return out;
}

TokenSequence fuse(const TokenSequence& tokens, const RoutingWeights& w,
                   const Eigen::MatrixXd& deltas, double alpha) {
  if (w.w.rows() != tokens.size() || w.w.cols() != 3)
    throw std::invalid_argument("fuse: routing matrix shape does not match tokens");
  if (deltas.rows() != 3 || deltas.cols() != tokens.channels())
    throw std::invalid_argument("fuse: delta matrix shape does not match tokens");
  TokenSequence out = tokens;
  if (alpha == 0.0) return out;
  out.tokens += alpha * (w.w * deltas);
  return out;
}

AuxPrediction aux_predict(const Eigen::MatrixXd& deltas, const ShiftParams& params) {
  if (deltas.rows() != 3 || deltas.cols() != params.channels())
    throw std::invalid_argument("aux_predict: delta matrix shape does not match parameters");
  const Eigen::Index m = params.block();
  std::array<DeltaForward, 3> heads;
  for (Eigen::Index k = 0; k < 3; ++k)
    heads[static_cast<std::size_t>(k)].delta = deltas.row(k).segment(k * m, m).transpose();
  const AuxForward f = aux_forward(heads, params.aux);
  return {f.stats, f.p_hat};
}

std::optional<Eigen::Vector3d> empirical_ratio(const SemanticPointCloud& cloud) {
  Eigen::Vector3d counts = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.points) {
    const auto g = group_of_color(p.color);
    if (is_foreground(g)) counts[foreground_index(g)] += 1.0;
  }
  const double total = counts.sum();
  if (total == 0.0) return std::nullopt;
  return counts / total;
}

LossBreakdown losses(const std::optional<Eigen::Vector3d>& p_gt, const Eigen::Vector3d& p_hat,
                     const RoutingWeights& w, const LossWeights& weights, double epsilon) {
  LossBreakdown out;
  out.weights = weights;
  out.epsilon = epsilon;
  if (!p_gt) return out;
  const Eigen::Vector3d& p = *p_gt;
  for (int k = 0; k < 3; ++k) {
    if (p[k] <= 0.0) continue;
    if (p_hat[k] <= 0.0) {
      out.ratio_infinite = true;
      out.l_ratio = std::numeric_limits<double>::infinity();
      break;
    }
    out.l_ratio += p[k] * (std::log(p[k]) - std::log(p_hat[k]));
  }
  if (w.w.rows() > 0) {
    const Eigen::Vector3d mean = w.w.colwise().mean().transpose();
    out.l_budget = (mean - p).squaredNorm();
  }
  out.l_ent = entropy_term(w.w, epsilon);
  out.total = weights.ratio * out.l_ratio + weights.budget * out.l_budget - weights.ent * out.l_ent;
  return out;
}

ShiftSample make_sample(const SceneEncoding& enc, const SemanticPointCloud& cloud) {
  return {enc.tokens.tokens, enc.prototypes, enc.present, empirical_ratio(cloud)};
}

namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& x) {
  acc.l_ratio += x.l_ratio;
  acc.l_budget += x.l_budget;
  acc.l_ent += x.l_ent;
  acc.ratio_infinite = acc.ratio_infinite || x.ratio_infinite;
}

LossBreakdown finalize(LossBreakdown acc, std::size_t n, const LossWeights& weights,
                       double epsilon) {
  const double inv = n ? 1.0 / static_cast<double>(n) : 0.0;
  acc.l_ratio *= inv;
  acc.l_budget *= inv;
  acc.l_ent *= inv;
  acc.weights = weights;
  acc.epsilon = epsilon;
  acc.total = weights.ratio * acc.l_ratio + weights.budget * acc.l_budget - weights.ent * acc.l_ent;
  return acc;
}

bool any_foreground(std::span<const ShiftSample* const> batch) {
  for (const auto* s : batch)
    if (s->p_gt) return true;
  return false;
}

std::vector<const ShiftSample*> pointers(std::span<const ShiftSample> batch) {
  std::vector<const ShiftSample*> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(&s);
  return out;
}

}  // namespace

LossBreakdown objective(std::span<const ShiftSample* const> batch, const ShiftParams& params,
                        const LossWeights& weights, double epsilon) {
  LossBreakdown acc;
  for (const auto* sp : batch) {
    const ShiftSample& s = *sp;
    if (!s.p_gt) continue;
    const auto heads = deltas_forward(s.prototypes, params, s.present);
    const AuxForward aux = aux_forward(heads, params.aux);
    accumulate(acc, losses(s.p_gt, aux.p_hat, route(s.tokens, params), weights, epsilon));
  }
  return finalize(acc, batch.size(), weights, epsilon);
}

LossBreakdown objective(std::span<const ShiftSample> batch, const ShiftParams& params,
                        const LossWeights& weights, double epsilon) {
  return objective(pointers(batch), params, weights, epsilon);
}

ObjectiveValue objective_and_grad(std::span<const ShiftSample* const> batch,
                                  const ShiftParams& params, const LossWeights& weights,
                                  double epsilon) {
  if (!any_foreground(batch))
    throw std::invalid_argument("objective_and_grad: no scene in the batch has foreground points");
  ObjectiveValue out{LossBreakdown{}, params.zeros_like()};
  const double scene_scale = 1.0 / static_cast<double>(batch.size());
  const Eigen::Index m = params.block();
  LossBreakdown acc;

  for (const auto* sp : batch) {
    const ShiftSample& s = *sp;
    if (!s.p_gt) continue;
    const Eigen::Vector3d& p = *s.p_gt;

    // Router forward.
    check_router_width(s.tokens.cols(), params);
    const Mlp& r = params.router;
    Eigen::MatrixXd act = (s.tokens * r.hidden.w.transpose()).rowwise() + r.hidden.b.transpose();
    tanh_inplace(act);
    RoutingWeights w;
    w.w = (act * r.out.w.transpose()).rowwise() + r.out.b.transpose();
    softmax_rows(w.w);

    // Delta heads and auxiliary head.
    const auto heads = deltas_forward(s.prototypes, params, s.present);
    const AuxForward aux = aux_forward(heads, params.aux);
    const LossBreakdown l = losses(s.p_gt, aux.p_hat, w, weights, epsilon);
    accumulate(acc, l);
    if (l.ratio_infinite) continue;

    // Router backward: budget and entropy act on the routing weights.
    const auto n = static_cast<double>(w.w.rows());
    if (w.w.rows() > 0) {
      const Eigen::RowVector3d mean = w.w.colwise().mean();
      const Eigen::RowVector3d budget_grad = weights.budget * 2.0 * (mean - p.transpose()) / n;
      Eigen::MatrixXd g_w = (weights.ent / n) *
                            ((w.w.array() + epsilon).log() + w.w.array() / (w.w.array() + epsilon))
                                .matrix();
      g_w.rowwise() += budget_grad;
      const Eigen::VectorXd inner = (w.w.array() * g_w.array()).rowwise().sum();
      Eigen::MatrixXd g_logit = w.w.array() * (g_w.colwise() - inner).array();
      g_logit *= scene_scale;

      Mlp& gr = out.grad.router;
      gr.out.w.noalias() += g_logit.transpose() * act;
      gr.out.b += g_logit.colwise().sum().transpose();
      Eigen::MatrixXd g_act = g_logit * r.out.w;
      g_act.array() *= 1.0 - act.array().square();
      gr.hidden.w.noalias() += g_act.transpose() * s.tokens;
      gr.hidden.b += g_act.colwise().sum().transpose();
    }

    // Ratio backward through the auxiliary head into the delta heads.
    if (weights.ratio == 0.0) continue;
    const Eigen::Vector3d g_q = scene_scale * weights.ratio * (aux.p_hat - p * p.sum());
    Mlp& ga = out.grad.aux;
    ga.out.w.noalias() += g_q * aux.hidden.transpose();
    ga.out.b += g_q;
    Eigen::VectorXd g_ah = params.aux.out.w.transpose() * g_q;
    g_ah.array() *= 1.0 - aux.hidden.array().square();
    ga.hidden.w.noalias() += g_ah * aux.stats.transpose();
    ga.hidden.b += g_ah;
    const Eigen::Matrix<double, 6, 1> g_stats = params.aux.hidden.w.transpose() * g_ah;

    for (std::size_t k = 0; k < 3; ++k) {
      const DeltaForward& h = heads[k];
      if (!h.active) continue;
      const double norm = aux.stats[3 + static_cast<Eigen::Index>(k)];
      Eigen::VectorXd g_delta =
          Eigen::VectorXd::Constant(m, g_stats[static_cast<Eigen::Index>(k)] / static_cast<double>(m));
      if (norm > 0.0) g_delta += (g_stats[3 + static_cast<Eigen::Index>(k)] / norm) * h.delta;
      const Eigen::VectorXd g_pre = g_delta.array() * h.pre.unaryExpr(&sigmoid).array();
      Mlp& gd = out.grad.delta[k];
      gd.out.w.noalias() += g_pre * h.hidden.transpose();
      gd.out.b += g_pre;
      Eigen::VectorXd g_hidden = params.delta[k].out.w.transpose() * g_pre;
      g_hidden.array() *= 1.0 - h.hidden.array().square();
      gd.hidden.w.noalias() +=
          g_hidden * s.prototypes.row(static_cast<Eigen::Index>(k));
      gd.hidden.b += g_hidden;
    }
  }
  out.loss = finalize(acc, batch.size(), weights, epsilon);
  return out;
}

ObjectiveValue objective_and_grad(std::span<const ShiftSample> batch, const ShiftParams& params,
                                  const LossWeights& weights, double epsilon) {
  return objective_and_grad(pointers(batch), params, weights, epsilon);
}

TrainStepResult train_step(std::span<const ShiftSample> batch, ShiftParams& params, double lr,
                           const LossWeights& weights, double epsilon) {
  return train_step(pointers(batch), params, lr, weights, epsilon);
}

TrainStepResult train_step(std::span<const ShiftSample* const> batch, ShiftParams& params,
                           double lr, const LossWeights& weights, double epsilon) {
  if (!(lr >= 0.0) || !std::isfinite(lr))
    throw std::invalid_argument("train_step: learning rate must be finite and >= 0");
  ObjectiveValue v = objective_and_grad(batch, params, weights, epsilon);
  if (!std::isfinite(v.loss.total))
    throw TrainingDiverged("train_step: non-finite loss (ratio=" + std::to_string(v.loss.l_ratio) +
                           ", budget=" + std::to_string(v.loss.l_budget) +
                           ", entropy=" + std::to_string(v.loss.l_ent) + ")");
  double sq = 0.0;
  v.grad.for_each_tensor([&sq](const std::string&, const auto& t) { sq += t.squaredNorm(); });
  if (lr != 0.0) params.axpy(-lr, v.grad);
  return {v.loss, std::sqrt(sq)};
}

GradientCheck check_gradient(std::span<const ShiftSample> batch, const ShiftParams& params,
                             const LossWeights& weights, double epsilon, double step,
                             double floor) {
  if (!(step > 0.0)) throw std::invalid_argument("check_gradient: step must be positive");
  const auto ptrs = pointers(batch);
  const ObjectiveValue analytic = objective_and_grad(ptrs, params, weights, epsilon);
  ShiftParams probe = params;
  std::vector<std::pair<std::string, const double*>> grads;
  analytic.grad.for_each_tensor(
      [&](const std::string& name, const auto& t) { grads.emplace_back(name, t.data()); });
  GradientCheck out;
  std::size_t tensor = 0;
  probe.for_each_tensor([&](const std::string& name, auto& t) {
    const double* g = grads[tensor++].second;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      double& x = t.data()[i];
      const double x0 = x;
      x = x0 + step;
      const double up = objective(ptrs, probe, weights, epsilon).total;
      x = x0 - step;
      const double down = objective(ptrs, probe, weights, epsilon).total;
      x = x0;
      const double numeric = (up - down) / (2.0 * step);
      const double abs_err = std::abs(g[i] - numeric);
      const double rel = abs_err / std::max({std::abs(g[i]), std::abs(numeric), floor});
      out.max_abs_error = std::max(out.max_abs_error, abs_err);
      if (rel > out.max_rel_error || out.checked == 0) {
        out.max_rel_error = rel;
        out.worst = name + "[" + std::to_string(i) + "]";
      }
      ++out.checked;
    }
  });
  return out;
}

}  // namespace semshift
