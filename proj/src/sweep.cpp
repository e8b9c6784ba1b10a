#include <algorithm>
#include <set>
#include <sstream>

#include "semshift/harness.hpp"
#include "semshift/rng.hpp"

namespace semshift::harness {

void SweepSpec::validate() const {
  if (intensities.empty()) throw std::invalid_argument("sweep: no intensities");
  for (double s : intensities)
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("sweep: intensities must lie in (0, 1]");
}

std::vector<std::optional<int>> pick_targets(std::span<const synth::SceneBundle> bundles,
                                             std::uint64_t seed) {
  std::vector<std::optional<int>> out;
  for (const auto& b : bundles) {
    std::set<int> ids;
    for (const auto& p : b.cloud.points)
      if (p.instance_id && *p.instance_id >= 0 &&
          *p.instance_id < static_cast<int>(b.scene.boxes.size()))
        ids.insert(*p.instance_id);
    if (ids.empty()) {
      out.push_back(std::nullopt);
      continue;
    }
    Rng rng(mix_seed(seed, b.params.seed));
    out.push_back(*std::next(ids.begin(), static_cast<std::ptrdiff_t>(rng.index(ids.size()))));
  }
  return out;
}

SweepResult run_sweep(const Model& model, std::span<const synth::SceneBundle> bundles,
                      std::span<const std::string> ids, std::uint64_t target_seed,
                      const SweepSpec& spec) {
  spec.validate();
  if (ids.size() != bundles.size()) throw std::invalid_argument("sweep: one id per bundle");
  SweepResult r;
  r.config = model.config();
  r.target_seed = target_seed;
  const auto picks = pick_targets(bundles, target_seed);
  std::vector<std::size_t> used;
  std::vector<OrientedBox> targets;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    if (!picks[i]) continue;
    used.push_back(i);
    r.ids.push_back(ids[i]);
    r.targets.push_back(*picks[i]);
    targets.push_back(bundles[i].scene.boxes[static_cast<std::size_t>(*picks[i])]);
  }

  auto run_at = [&](double s) {
    std::vector<std::vector<OrientedBox>> preds;
    for (std::size_t q = 0; q < used.size(); ++q)
      preds.push_back(control_decode(model, bundles[used[q]].cloud, r.targets[q], s));
    return eval::summarize_control(preds, targets);
  };
  const eval::ControlRun reference = run_at(1.0);
  for (double s : spec.intensities) {
    SweepRow row;
    row.intensity = s;
    row.run = s == 1.0 ? reference : run_at(s);
    row.metrics = eval::controllability_metrics(row.run, reference);
    r.rows.push_back(row);
  }
  return r;
}

Json to_json(const SweepResult& r) {
  Json j;
  j["config"] = to_json(r.config);
  j["seed"] = r.config.seed;
  j["target_seed"] = r.target_seed;
  Json targets = Json::array();
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    Json t;
    t["id"] = r.ids[i];
    t["instance_id"] = r.targets[i];
    targets.push_back(std::move(t));
  }
  j["targets"] = std::move(targets);
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json rj;
    rj["intensity"] = row.intensity;
    rj["hit_rate"] = row.metrics.hit_rate;
    rj["target_only"] = row.metrics.target_only;
    rj["delta_fp"] = row.metrics.delta_fp;
    rj["precision_drop"] = row.metrics.precision_drop;
    rj["scenes"] = row.run.scenes;
    rj["hits"] = row.run.hits;
    rj["target_only_count"] = row.run.target_only;
    rj["boxes"] = row.run.boxes;
    rj["mean_fp"] = row.run.mean_fp;
    rj["precision"] = row.run.precision;
    rows.push_back(std::move(rj));
  }
  j["rows"] = std::move(rows);
  j["context"] = "reference hit-rate at 100% intensity: 0.9524 (annotation only)";
  return j;
}

std::string render_sweep_table(const SweepResult& r) {
  std::ostringstream os;
  os << "variant " << variant_name(r.config.variant) << ", " << r.ids.size()
     << " scenes with one target each\n";
  os << "intensity | hit-rate | target-only | dFP     | precision drop\n";
  for (const auto& row : r.rows) {
    std::string pct = std::to_string(static_cast<int>(row.intensity * 100.0 + 0.5)) + "%";
    pct.resize(9, ' ');
    const double dfp = row.metrics.delta_fp;
    os << pct << " | " << fixed(row.metrics.hit_rate) << "   | " << fixed(row.metrics.target_only)
       << "      | " << (dfp >= 0 ? "+" : "") << fixed(dfp) << " | " << fixed(row.metrics.precision_drop)
       << "\n";
  }
  os << "context: reference hit-rate at 100% intensity is 0.9524 (not asserted)\n";
  return os.str();
}

}  // namespace semshift::harness
