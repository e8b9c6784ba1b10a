#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semshift/decoder.hpp"
#include "semshift/eval.hpp"
#include "semshift/io.hpp"
#include "semshift/shift.hpp"
#include "semshift/synth.hpp"
#include "semshift/tokenizer.hpp"

namespace semshift::harness {

using io::Json;

enum class Variant { Full, NoRatio, NoBudget, NoEntropy, RandomColor, ColorPerturb, NoShift };

std::string_view variant_name(Variant v);
std::optional<Variant> variant_from_name(std::string_view name);

struct TrainConfig {
  int steps = 2000;
  int batch = 4;
  double lr = 0.5;

  void validate() const;
};

struct RunConfig {
  EncoderConfig encoder;
  ShiftConfig shift;
  DecoderConfig decoder;
  TrainConfig train;
  std::string manifest;
  std::string out_dir = "runs/default";
  std::uint64_t seed = 1;
  Variant variant = Variant::Full;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;

  /// Shift settings after the variant override (a zeroed lambda or alpha) and the run seed.
  ShiftConfig effective_shift() const;
};

Json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown variants throw io::IoError.
RunConfig run_config_from_json(const Json& j);
RunConfig read_run_config(const std::filesystem::path& path);

/// Input colors a variant trains and evaluates on. Full and the lambda ablations keep the
/// lifted colors.
SemanticPointCloud variant_colors(const SemanticPointCloud& cloud, Variant v, std::uint64_t seed);

Json to_json(const LossBreakdown& l);

struct Checkpoint {
  RunConfig config;
  int step = 0;
  ShiftParams params;
  std::optional<LossBreakdown> final_loss;  // full-set objective after the last step
};

Json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const Json& j);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Frozen encoder plus trained shift, ready to run the inference pipeline.
class Model {
 public:
  explicit Model(Checkpoint ckpt);

  const RunConfig& config() const { return ckpt_.config; }
  const Checkpoint& checkpoint() const { return ckpt_; }
  const ShiftParams& params() const { return ckpt_.params; }
  const PointEncoder& encoder() const { return encoder_; }

 private:
  Checkpoint ckpt_;
  PointEncoder encoder_;
};

struct Prediction {
  RoutingWeights routing;
  TokenSequence fused;
  StructuredScene scene;  // after the DSL round trip
  std::string dsl;
};

/// tokenize -> route -> class deltas -> fuse -> decode -> DSL text -> parsed scene.
Prediction predict(const Model& model, const SemanticPointCloud& cloud);

/// Furniture boxes predicted for a target-only input at intensity s in [0, 1].
std::vector<OrientedBox> control_decode(const Model& model, const SemanticPointCloud& cloud,
                                        int target, double s);

struct TrainData {
  std::vector<std::string> ids;
  std::vector<ShiftSample> samples;
};

/// Loads every manifest bundle, applies the variant colors and encodes them once.
TrainData prepare_training_data(const RunConfig& config, const io::Manifest& manifest);
TrainData prepare_training_data(const RunConfig& config,
                                std::span<const synth::SceneBundle> bundles,
                                std::span<const std::string> ids);

/// Scene indices of one step: consecutive slices of a per-epoch permutation seeded by the run.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t n, int batch, int step);

using LogSink = std::function<void(const Json&)>;

/// Runs from the checkpoint's step (or 0) up to config.train.steps.
Checkpoint train(const RunConfig& config, const TrainData& data,
                 const std::optional<Checkpoint>& resume = std::nullopt,
                 const LogSink& log = {});

Json log_row(int step, const TrainStepResult& r, const RunConfig& config);

struct SceneReport {
  std::string id;
  std::string dsl;
  eval::SceneEval metrics;
  eval::SceneStats stats;
};

struct EvalReport {
  RunConfig config;
  int step = 0;
  std::vector<double> thresholds;
  std::vector<SceneReport> scenes;
  std::vector<eval::SceneEval> baseline;  // same model on colorless input
  std::vector<eval::SliceResult> slices;  // empty below 4 scenes
};

eval::SceneStats scene_stats(const synth::SceneBundle& bundle);

EvalReport run_eval(const Model& model, const io::Manifest& manifest,
                    const std::vector<double>& thresholds);
EvalReport run_eval(const Model& model, std::span<const synth::SceneBundle> bundles,
                    std::span<const std::string> ids, const std::vector<double>& thresholds);

/// Per-threshold layout/box F1, miss rate and the full-house stand-in for pooled counts.
Json metrics_json(const eval::SceneEval& m, const std::vector<double>& thresholds);
eval::SceneEval pooled(std::span<const SceneReport> scenes);
Json to_json(const EvalReport& r);
std::string render_eval_table(const EvalReport& r);

struct SweepSpec {
  std::vector<double> intensities{1.0, 0.75, 0.5, 0.25};
  void validate() const;
};

struct SweepRow {
  double intensity = 0.0;
  eval::ControlRun run;
  eval::ControllabilityMetrics metrics;
};

struct SweepResult {
  RunConfig config;
  std::uint64_t target_seed = 0;
  std::vector<std::string> ids;
  std::vector<int> targets;
  std::vector<SweepRow> rows;
};

/// One furniture instance per scene drawn from the dataset seed; scenes without
/// furniture points get none.
std::vector<std::optional<int>> pick_targets(std::span<const synth::SceneBundle> bundles,
                                             std::uint64_t seed);

SweepResult run_sweep(const Model& model, std::span<const synth::SceneBundle> bundles,
                      std::span<const std::string> ids, std::uint64_t target_seed,
                      const SweepSpec& spec);

Json to_json(const SweepResult& r);
std::string render_sweep_table(const SweepResult& r);

/// Fixed-point rendering for tables and reports.
std::string fixed(double v, int digits = 4);

}  // namespace semshift::harness
