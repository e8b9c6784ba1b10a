#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semshift/core.hpp"

namespace semshift::eval {

/// Exact IoU of two yaw-only boxes. Throws std::invalid_argument on a zero-volume box.
double iou3d(const OrientedBox& a, const OrientedBox& b);

enum class LayoutKind { Wall, Door, Window };

std::string_view layout_kind_name(LayoutKind k);

/// A wall, or an opening together with the wall that hosts it.
struct LayoutElement {
  LayoutKind kind = LayoutKind::Wall;
  WallSegment wall;  // the wall itself, or the opening's host
  Opening opening;   // meaningful for doors and windows only
};

std::vector<LayoutElement> layout_elements(const StructuredScene& scene);

/// Openings further than this from the ground-truth wall plane never overlap.
inline constexpr double kOpeningPlaneGate = 0.5;
inline constexpr double kOpeningAngleGateDeg = 30.0;

/// Walls: plan-view thickness rectangles. Openings: elevation rectangles on the ground-truth
/// host wall, gated by angle and plane distance. Throws std::invalid_argument on kind mismatch.
double iou2d_layout(const LayoutElement& pred, const LayoutElement& gt);

struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_pred;
  std::vector<std::size_t> unmatched_gt;
  double threshold = 0.0;
};

struct F1Result {
  MatchResult match;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Marks a (pred, gt) pair that may not be matched, e.g. different categories.
inline constexpr double kIncompatible = -1.0;

/// Greedy one-to-one matching in descending IoU (ties by pred, then gt index).
/// iou is pred x gt; entries below threshold or equal to kIncompatible never pair.
F1Result match_and_f1(const Eigen::MatrixXd& iou, double threshold);

Eigen::MatrixXd box_iou_matrix(std::span<const OrientedBox> preds, std::span<const OrientedBox> gts);
Eigen::MatrixXd layout_iou_matrix(std::span<const LayoutElement> preds,
                                  std::span<const LayoutElement> gts);

F1Result match_boxes(std::span<const OrientedBox> preds, std::span<const OrientedBox> gts,
                     double threshold);
F1Result match_layout(std::span<const LayoutElement> preds, std::span<const LayoutElement> gts,
                      double threshold);

/// Precision, recall and F1 from raw counts with the empty-set conventions used above.
struct Counts {
  std::size_t tp = 0;
  std::size_t n_pred = 0;
  std::size_t n_gt = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    n_pred += o.n_pred;
    n_gt += o.n_gt;
    return *this;
  }
  double precision() const;
  double recall() const;
  double f1() const;
  double miss_rate() const { return 1.0 - recall(); }
};

Counts counts_of(const F1Result& r);

/// |unmatched gt| / |gt|, zero without ground truth.
double miss_rate(const MatchResult& match, std::size_t n_gts);

/// Stand-in for the joint layout and box aggregate: their arithmetic mean.
double full_house(double layout_f1, double box_f1);

/// Per-scene counts at each threshold.
struct SceneEval {
  std::map<double, Counts> layout;
  std::map<double, Counts> box;
};

inline const std::vector<double> kDefaultThresholds{0.25, 0.5};

SceneEval evaluate_scene(const StructuredScene& pred, const StructuredScene& gt,
                         std::span<const double> thresholds = kDefaultThresholds);

struct ControllabilityMetrics {
  double hit_rate = 0.0;
  double target_only = 0.0;
  double delta_fp = 0.0;
  double precision_drop = 0.0;
};

/// One run of target-only decodes; mean_fp and precision are at IoU 0.25 against the target.
struct ControlRun {
  std::size_t scenes = 0;
  std::size_t hits = 0;
  std::size_t target_only = 0;
  std::size_t boxes = 0;
  std::size_t matched = 0;
  double mean_fp = 0.0;
  double precision = 1.0;
};

inline constexpr double kControlIou = 0.25;

/// Scores predicted furniture boxes per scene against one target box per scene.
ControlRun summarize_control(std::span<const std::vector<OrientedBox>> preds,
                             std::span<const OrientedBox> targets);

/// Throws std::invalid_argument when the reference is missing or has a different scene count.
ControllabilityMetrics controllability_metrics(const ControlRun& run,
                                               const std::optional<ControlRun>& reference);

struct SceneStats {
  std::optional<double> opening_width;  // mean annotated opening width; absent without openings
  double furniture_count = 0.0;
  double visible_points = 0.0;
};

enum class SliceKind { ThinOpenings, ClutteredFurniture, LowSupport };

std::string_view slice_name(SliceKind k);

/// Indices of the scenes in the bottom (or top) quartile of values, ties at the boundary
/// included. The boundary is the value at sorted rank ceil(n/4). Throws for fewer than 4 values.
std::vector<std::size_t> quartile_members(std::span<const double> values, bool top);

struct SliceResult {
  SliceKind kind;
  std::string metric;
  std::vector<std::size_t> scenes;
  double baseline = 0.0;
  double ours = 0.0;
  double delta = 0.0;
};

/// Thin openings use layout F1 at 0.5; the other two slices use box F1 at 0.25.
/// Scenes without openings are not ranked for the thin-opening slice.
std::vector<SliceResult> failure_slices(std::span<const SceneStats> stats,
                                        std::span<const SceneEval> baseline,
                                        std::span<const SceneEval> ours);

}  // namespace semshift::eval
