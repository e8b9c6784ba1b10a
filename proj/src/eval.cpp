#include "semshift/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "semshift/geometry.hpp"

namespace semshift::eval {

double iou3d(const OrientedBox& a, const OrientedBox& b) {
  const double va = a.volume();
  const double vb = b.volume();
  if (!(va > 0.0) || !(vb > 0.0)) throw std::invalid_argument("iou3d: degenerate box");
  const auto fa = geom::box_footprint(a);
  const auto fb = geom::box_footprint(b);
  const double area = geom::convex_intersection_area(fa, fb);
  const double z0 = std::max(a.center.z - a.size.z / 2, b.center.z - b.size.z / 2);
  const double z1 = std::min(a.center.z + a.size.z / 2, b.center.z + b.size.z / 2);
  const double inter = area * std::max(0.0, z1 - z0);
  if (inter <= 0.0) return 0.0;
  return std::clamp(inter / (va + vb - inter), 0.0, 1.0);
}

std::string_view layout_kind_name(LayoutKind k) {
  switch (k) {
    case LayoutKind::Wall: return "wall";
    case LayoutKind::Door: return "door";
    case LayoutKind::Window: return "window";
  }
  return "?";
}

std::vector<LayoutElement> layout_elements(const StructuredScene& scene) {
  std::vector<LayoutElement> out;
  for (const auto& w : scene.walls) out.push_back({LayoutKind::Wall, w, {}});
  for (const auto& o : scene.openings) {
    if (o.wall_index < 0 || static_cast<std::size_t>(o.wall_index) >= scene.walls.size())
      throw std::invalid_argument("layout_elements: dangling wall reference");
    out.push_back({o.kind == OpeningKind::Door ? LayoutKind::Door : LayoutKind::Window,
                   scene.walls[static_cast<std::size_t>(o.wall_index)], o});
  }
  return out;
}

namespace {

double interval_overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

double wall_iou(const WallSegment& p, const WallSegment& g) {
  const auto fp = geom::wall_footprint(p);
  const auto fg = geom::wall_footprint(g);
  const double ap = std::abs(geom::signed_area(fp));
  const double ag = std::abs(geom::signed_area(fg));
  if (!(ap > 0.0) || !(ag > 0.0)) throw std::invalid_argument("iou2d_layout: degenerate wall");
  const double inter = geom::convex_intersection_area(fp, fg);
  if (inter <= 0.0) return 0.0;
  return std::clamp(inter / (ap + ag - inter), 0.0, 1.0);
}

geom::Vec2 unit_dir(const WallSegment& w) {
  const geom::Vec2 d = geom::xy(w.b) - geom::xy(w.a);
  const double n = d.norm();
  if (!(n > 0.0)) throw std::invalid_argument("iou2d_layout: degenerate host wall");
  return d * (1.0 / n);
}

double opening_iou(const LayoutElement& p, const LayoutElement& g) {
  const geom::Vec2 gd = unit_dir(g.wall);
  const geom::Vec2 pd = unit_dir(p.wall);
  const double cos_angle = std::min(1.0, std::abs(gd.dot(pd)));
  if (std::acos(cos_angle) > kOpeningAngleGateDeg * kPi / 180.0) return 0.0;
  const geom::Vec2 ga = geom::xy(g.wall.a);
  const geom::Vec2 gn{-gd.y, gd.x};
  const geom::Vec2 pc = geom::xy(p.opening.center);
  if (std::abs(gn.dot(pc - ga)) > kOpeningPlaneGate) return 0.0;

  const double gt_mid = gd.dot(geom::xy(g.opening.center) - ga);
  const double g0 = gt_mid - g.opening.width / 2;
  const double g1 = gt_mid + g.opening.width / 2;
  const double e0 = gd.dot(pc - pd * (p.opening.width / 2) - ga);
  const double e1 = gd.dot(pc + pd * (p.opening.width / 2) - ga);
  const double p0 = std::min(e0, e1);
  const double p1 = std::max(e0, e1);

  const double gz0 = g.opening.center.z - g.opening.height / 2;
  const double gz1 = g.opening.center.z + g.opening.height / 2;
  const double pz0 = p.opening.center.z - p.opening.height / 2;
  const double pz1 = p.opening.center.z + p.opening.height / 2;

  const double inter = interval_overlap(p0, p1, g0, g1) * interval_overlap(pz0, pz1, gz0, gz1);
  const double ap = (p1 - p0) * (pz1 - pz0);
  const double ag = (g1 - g0) * (gz1 - gz0);
  if (!(ap > 0.0) || !(ag > 0.0)) throw std::invalid_argument("iou2d_layout: degenerate opening");
  if (inter <= 0.0) return 0.0;
  return std::clamp(inter / (ap + ag - inter), 0.0, 1.0);
}

}  // namespace

double iou2d_layout(const LayoutElement& pred, const LayoutElement& gt) {
  if (pred.kind != gt.kind)
    throw std::invalid_argument("iou2d_layout: cannot compare " +
                                std::string(layout_kind_name(pred.kind)) + " with " +
                                std::string(layout_kind_name(gt.kind)));
  if (pred.kind == LayoutKind::Wall) return wall_iou(pred.wall, gt.wall);
  return opening_iou(pred, gt);
}

double Counts::precision() const {
  if (n_pred == 0) return 1.0;
  return static_cast<double>(tp) / static_cast<double>(n_pred);
}

double Counts::recall() const {
  if (n_gt == 0) return 1.0;
  return static_cast<double>(tp) / static_cast<double>(n_gt);
}

double Counts::f1() const {
  if (n_pred == 0 && n_gt == 0) return 1.0;
  const double p = precision();
  const double r = recall();
  if (n_pred == 0 || n_gt == 0 || p + r == 0.0) return 0.0;
  return 2 * p * r / (p + r);
}

Counts counts_of(const F1Result& r) {
  return {r.match.pairs.size(), r.match.pairs.size() + r.match.unmatched_pred.size(),
          r.match.pairs.size() + r.match.unmatched_gt.size()};
}

F1Result match_and_f1(const Eigen::MatrixXd& iou, double threshold) {
  F1Result out;
  out.match.threshold = threshold;
  std::vector<MatchPair> cand;
  for (Eigen::Index i = 0; i < iou.rows(); ++i)
    for (Eigen::Index j = 0; j < iou.cols(); ++j) {
      const double v = iou(i, j);
      if (v == kIncompatible || !(v >= threshold)) continue;
      cand.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), v});
    }
  std::stable_sort(cand.begin(), cand.end(),
                   [](const MatchPair& a, const MatchPair& b) { return a.iou > b.iou; });
  std::vector<bool> pred_used(static_cast<std::size_t>(iou.rows()), false);
  std::vector<bool> gt_used(static_cast<std::size_t>(iou.cols()), false);
  for (const auto& c : cand) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = true;
    gt_used[c.gt] = true;
    out.match.pairs.push_back(c);
  }
  for (std::size_t i = 0; i < pred_used.size(); ++i)
    if (!pred_used[i]) out.match.unmatched_pred.push_back(i);
  for (std::size_t j = 0; j < gt_used.size(); ++j)
    if (!gt_used[j]) out.match.unmatched_gt.push_back(j);
  const Counts c = counts_of(out);
  out.precision = c.precision();
  out.recall = c.recall();
  out.f1 = c.f1();
  return out;
}

Eigen::MatrixXd box_iou_matrix(std::span<const OrientedBox> preds, std::span<const OrientedBox> gts) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(preds.size()), static_cast<Eigen::Index>(gts.size()));
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          preds[i].category == gts[j].category ? iou3d(preds[i], gts[j]) : kIncompatible;
  return m;
}

Eigen::MatrixXd layout_iou_matrix(std::span<const LayoutElement> preds,
                                  std::span<const LayoutElement> gts) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(preds.size()), static_cast<Eigen::Index>(gts.size()));
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          preds[i].kind == gts[j].kind ? iou2d_layout(preds[i], gts[j]) : kIncompatible;
  return m;
}

F1Result match_boxes(std::span<const OrientedBox> preds, std::span<const OrientedBox> gts,
                     double threshold) {
  return match_and_f1(box_iou_matrix(preds, gts), threshold);
}

F1Result match_layout(std::span<const LayoutElement> preds, std::span<const LayoutElement> gts,
                      double threshold) {
  return match_and_f1(layout_iou_matrix(preds, gts), threshold);
}

double miss_rate(const MatchResult& match, std::size_t n_gts) {
  if (n_gts == 0) return 0.0;
  return static_cast<double>(match.unmatched_gt.size()) / static_cast<double>(n_gts);
}

double full_house(double layout_f1, double box_f1) { return 0.5 * (layout_f1 + box_f1); }

SceneEval evaluate_scene(const StructuredScene& pred, const StructuredScene& gt,
                         std::span<const double> thresholds) {
  const auto pl = layout_elements(pred);
  const auto gl = layout_elements(gt);
  const Eigen::MatrixXd layout_iou = layout_iou_matrix(pl, gl);
  const Eigen::MatrixXd box_iou = box_iou_matrix(pred.boxes, gt.boxes);
  SceneEval out;
  for (double t : thresholds) {
    out.layout[t] = counts_of(match_and_f1(layout_iou, t));
    out.box[t] = counts_of(match_and_f1(box_iou, t));
  }
  return out;
}

ControlRun summarize_control(std::span<const std::vector<OrientedBox>> preds,
                             std::span<const OrientedBox> targets) {
  if (preds.size() != targets.size())
    throw std::invalid_argument("summarize_control: one target per scene is required");
  ControlRun run;
  run.scenes = preds.size();
  std::size_t fp = 0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const OrientedBox& target = targets[s];
    const auto r = match_boxes(preds[s], std::span<const OrientedBox>(&target, 1), kControlIou);
    const bool hit = !r.match.pairs.empty();
    run.hits += hit ? 1 : 0;
    run.target_only += (hit && preds[s].size() == 1) ? 1 : 0;
    run.boxes += preds[s].size();
    run.matched += r.match.pairs.size();
    fp += r.match.unmatched_pred.size();
  }
  run.mean_fp = run.scenes ? static_cast<double>(fp) / static_cast<double>(run.scenes) : 0.0;
  run.precision = run.boxes ? static_cast<double>(run.matched) / static_cast<double>(run.boxes) : 1.0;
  return run;
}

ControllabilityMetrics controllability_metrics(const ControlRun& run,
                                               const std::optional<ControlRun>& reference) {
  if (!reference) throw std::invalid_argument("controllability_metrics: missing reference run");
  if (reference->scenes != run.scenes)
    throw std::invalid_argument("controllability_metrics: reference covers a different scene set");
  ControllabilityMetrics m;
  const double n = run.scenes ? static_cast<double>(run.scenes) : 1.0;
  m.hit_rate = static_cast<double>(run.hits) / n;
  m.target_only = static_cast<double>(run.target_only) / n;
  m.delta_fp = run.mean_fp - reference->mean_fp;
  m.precision_drop = reference->precision - run.precision;
  return m;
}

std::string_view slice_name(SliceKind k) {
  switch (k) {
    case SliceKind::ThinOpenings: return "thin_openings";
    case SliceKind::ClutteredFurniture: return "cluttered_furniture";
    case SliceKind::LowSupport: return "low_support";
  }
  return "?";
}

std::vector<std::size_t> quartile_members(std::span<const double> values, bool top) {
  if (values.size() < 4) throw std::invalid_argument("quartile_members: fewer than 4 scenes");
  std::vector<double> sorted(values.begin(), values.end());
  if (top)
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
  else
    std::sort(sorted.begin(), sorted.end());
  const std::size_t rank = (values.size() + 3) / 4;  // ceil(n/4), 1-based
  const double boundary = sorted[rank - 1];
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (top ? values[i] >= boundary : values[i] <= boundary) out.push_back(i);
  return out;
}

std::vector<SliceResult> failure_slices(std::span<const SceneStats> stats,
                                        std::span<const SceneEval> baseline,
                                        std::span<const SceneEval> ours) {
  if (stats.size() < 4) throw std::invalid_argument("failure_slices: fewer than 4 scenes");
  if (baseline.size() != stats.size() || ours.size() != stats.size())
    throw std::invalid_argument("failure_slices: per-scene inputs differ in length");

  auto pooled = [](std::span<const SceneEval> evals, const std::vector<std::size_t>& members,
                   bool layout, double t) {
    Counts c;
    for (auto i : members) {
      const auto& m = layout ? evals[i].layout : evals[i].box;
      auto it = m.find(t);
      if (it == m.end()) throw std::invalid_argument("failure_slices: missing threshold");
      c += it->second;
    }
    return c.f1();
  };

  std::vector<SliceResult> out;
  auto add = [&](SliceKind kind, std::vector<std::size_t> members, bool layout, double t,
                 std::string metric) {
    SliceResult r{kind, std::move(metric), std::move(members), 0, 0, 0};
    r.baseline = pooled(baseline, r.scenes, layout, t);
    r.ours = pooled(ours, r.scenes, layout, t);
    r.delta = r.ours - r.baseline;
    out.push_back(std::move(r));
  };

  std::vector<std::size_t> with_openings;
  std::vector<double> widths;
  for (std::size_t i = 0; i < stats.size(); ++i)
    if (stats[i].opening_width) {
      with_openings.push_back(i);
      widths.push_back(*stats[i].opening_width);
    }
  std::vector<std::size_t> thin;
  if (widths.size() >= 4)
    for (auto k : quartile_members(widths, false)) thin.push_back(with_openings[k]);
  add(SliceKind::ThinOpenings, thin, true, 0.5, "layout F1 @ IoU2D 0.5");

  std::vector<double> furn, support;
  for (const auto& s : stats) {
    furn.push_back(s.furniture_count);
    support.push_back(s.visible_points);
  }
  add(SliceKind::ClutteredFurniture, quartile_members(furn, true), false, 0.25,
      "box F1 @ IoU3D 0.25");
  add(SliceKind::LowSupport, quartile_members(support, false), false, 0.25, "box F1 @ IoU3D 0.25");
  return out;
}

}  // namespace semshift::eval
