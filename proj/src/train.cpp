#include <numeric>

#include "semshift/harness.hpp"
#include "semshift/lift.hpp"
#include "semshift/rng.hpp"

namespace semshift::harness {

TrainData prepare_training_data(const RunConfig& config,
                                std::span<const synth::SceneBundle> bundles,
                                std::span<const std::string> ids) {
  if (ids.size() != bundles.size()) throw std::invalid_argument("training data: one id per bundle");
  const PointEncoder encoder(config.encoder);
  TrainData d;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const auto cloud = variant_colors(bundles[i].cloud, config.variant,
                                      mix_seed(config.seed, bundles[i].params.seed));
    d.samples.push_back(make_sample(encode_scene(cloud, encoder), cloud));
    d.ids.push_back(ids[i]);
  }
  return d;
}

TrainData prepare_training_data(const RunConfig& config, const io::Manifest& manifest) {
  std::vector<synth::SceneBundle> bundles;
  std::vector<std::string> ids;
  for (const auto& e : manifest.scenes) {
    bundles.push_back(io::read_bundle(manifest.resolve(e)));
    ids.push_back(e.id);
  }
  return prepare_training_data(config, bundles, ids);
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t n, int batch, int step) {
  if (n == 0) throw std::invalid_argument("batch_indices: empty training set");
  if (batch < 1 || step < 0) throw std::invalid_argument("batch_indices: bad batch or step");
  const std::size_t b = static_cast<std::size_t>(batch);
  const std::size_t per_epoch = (n + b - 1) / b;
  const std::size_t epoch = static_cast<std::size_t>(step) / per_epoch;
  const std::size_t start = (static_cast<std::size_t>(step) % per_epoch) * b;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(mix_seed(mix_seed(seed, 0x62617463), epoch));
  rng.shuffle(perm);
  return {perm.begin() + static_cast<std::ptrdiff_t>(start),
          perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + b))};
}

Json log_row(int step, const TrainStepResult& r, const RunConfig& config) {
  Json j;
  j["step"] = step;
  j["variant"] = std::string(variant_name(config.variant));
  const Json loss = to_json(r.loss);
  for (const auto& [k, v] : loss.items()) j[k] = v;
  j["grad_norm"] = r.grad_norm;
  return j;
}

namespace {

Json comparable(RunConfig c) {
  c.train.steps = 0;
  c.out_dir.clear();
  c.manifest.clear();
  return to_json(c);
}

}  // namespace

Checkpoint train(const RunConfig& config, const TrainData& data,
                 const std::optional<Checkpoint>& resume, const LogSink& log) {
  config.validate();
  if (data.samples.empty()) throw std::invalid_argument("train: no training scenes");
  const ShiftConfig sc = config.effective_shift();
  Checkpoint ck;
  ck.config = config;
  if (resume) {
    if (comparable(resume->config) != comparable(config))
      throw std::invalid_argument("train: resume checkpoint was trained with a different config");
    if (resume->step > config.train.steps)
      throw std::invalid_argument("train: checkpoint is past the requested step count");
    ck.params = resume->params;
    ck.step = resume->step;
  } else {
    ck.params = ShiftParams::initialize(sc);
  }

  std::vector<const ShiftSample*> batch;
  for (int t = ck.step; t < config.train.steps; ++t) {
    batch.clear();
    for (auto i : batch_indices(config.seed, data.samples.size(), config.train.batch, t))
      batch.push_back(&data.samples[i]);
    const auto r = train_step(std::span<const ShiftSample* const>(batch), ck.params,
                              config.train.lr, sc.weights, sc.epsilon);
    if (log) log(log_row(t, r, config));
  }
  ck.step = config.train.steps;

  std::vector<const ShiftSample*> all;
  for (const auto& s : data.samples) all.push_back(&s);
  ck.final_loss = objective(std::span<const ShiftSample* const>(all), ck.params, sc.weights,
                            sc.epsilon);
  return ck;
}

}  // namespace semshift::harness
