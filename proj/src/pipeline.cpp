#include <algorithm>
#include <sstream>

#include "semshift/dsl.hpp"
#include "semshift/harness.hpp"
#include "semshift/lift.hpp"
#include "semshift/rng.hpp"

namespace semshift::harness {

Model::Model(Checkpoint ckpt) : ckpt_(std::move(ckpt)), encoder_(ckpt_.config.encoder) {
  ckpt_.config.validate();
  if (ckpt_.params.channels() != ckpt_.config.encoder.channels)
    throw std::invalid_argument("model: parameter width does not match the encoder");
}

Prediction predict(const Model& model, const SemanticPointCloud& cloud) {
  const ShiftParams& params = model.params();
  const SceneEncoding enc = encode_scene(cloud, model.encoder());
  Prediction out;
  out.routing = route(enc.tokens, params);
  const Eigen::MatrixXd deltas = class_deltas(enc.prototypes, params, enc.present);
  out.fused = fuse(enc.tokens, out.routing, deltas, params.alpha);
  const StructuredScene decoded = decode(out.fused, out.routing, model.config().decoder);
  out.dsl = dsl::serialize(decoded);
  out.scene = dsl::parse(out.dsl);
  return out;
}

std::vector<OrientedBox> control_decode(const Model& model, const SemanticPointCloud& cloud,
                                        int target, double s) {
  return predict(model, scale_intensity(make_target_only(cloud, target), s)).scene.boxes;
}

eval::SceneStats scene_stats(const synth::SceneBundle& bundle) {
  eval::SceneStats st;
  if (!bundle.scene.openings.empty()) {
    double w = 0.0;
    for (const auto& o : bundle.scene.openings) w += o.width;
    st.opening_width = w / static_cast<double>(bundle.scene.openings.size());
  }
  st.furniture_count = static_cast<double>(bundle.scene.boxes.size());
  std::size_t visible = 0;
  for (const auto& s : bundle.pmap.support) visible += s.empty() ? 0 : 1;
  st.visible_points = static_cast<double>(visible);
  return st;
}

EvalReport run_eval(const Model& model, std::span<const synth::SceneBundle> bundles,
                    std::span<const std::string> ids, const std::vector<double>& thresholds) {
  if (ids.size() != bundles.size()) throw std::invalid_argument("run_eval: one id per bundle");
  EvalReport r;
  r.config = model.config();
  r.step = model.checkpoint().step;
  r.thresholds = thresholds;
  std::vector<eval::SceneStats> stats;
  std::vector<eval::SceneEval> ours;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const auto& b = bundles[i];
    const auto cloud =
        variant_colors(b.cloud, r.config.variant, mix_seed(r.config.seed, b.params.seed));
    const Prediction p = predict(model, cloud);
    SceneReport s;
    s.id = ids[i];
    s.dsl = p.dsl;
    s.metrics = eval::evaluate_scene(p.scene, b.scene, thresholds);
    s.stats = scene_stats(b);
    const Prediction base = predict(model, scale_intensity(cloud, 0.0));
    r.baseline.push_back(eval::evaluate_scene(base.scene, b.scene, thresholds));
    stats.push_back(s.stats);
    ours.push_back(s.metrics);
    r.scenes.push_back(std::move(s));
  }
  const bool has_slice_thresholds =
      std::count(thresholds.begin(), thresholds.end(), 0.25) && std::count(thresholds.begin(), thresholds.end(), 0.5);
  if (bundles.size() >= 4 && has_slice_thresholds) r.slices = eval::failure_slices(stats, r.baseline, ours);
  return r;
}

EvalReport run_eval(const Model& model, const io::Manifest& manifest,
                    const std::vector<double>& thresholds) {
  std::vector<synth::SceneBundle> bundles;
  std::vector<std::string> ids;
  for (const auto& e : manifest.scenes) {
    bundles.push_back(io::read_bundle(manifest.resolve(e)));
    ids.push_back(e.id);
  }
  return run_eval(model, bundles, ids, thresholds);
}

eval::SceneEval pooled(std::span<const SceneReport> scenes) {
  eval::SceneEval total;
  for (const auto& s : scenes) {
    for (const auto& [t, c] : s.metrics.layout) total.layout[t] += c;
    for (const auto& [t, c] : s.metrics.box) total.box[t] += c;
  }
  return total;
}

namespace {

eval::Counts counts_at(const std::map<double, eval::Counts>& m, double t) {
  const auto it = m.find(t);
  return it == m.end() ? eval::Counts{} : it->second;
}

Json counts_json(const eval::Counts& c) {
  Json j;
  j["tp"] = c.tp;
  j["n_pred"] = c.n_pred;
  j["n_gt"] = c.n_gt;
  return j;
}

}  // namespace

Json metrics_json(const eval::SceneEval& m, const std::vector<double>& thresholds) {
  Json j = Json::array();
  for (double t : thresholds) {
    const auto lay = counts_at(m.layout, t);
    const auto box = counts_at(m.box, t);
    Json row;
    row["threshold"] = t;
    row["layout_f1"] = lay.f1();
    row["box_f1"] = box.f1();
    row["layout_miss_rate"] = lay.miss_rate();
    row["box_miss_rate"] = box.miss_rate();
    row["full_house_stand_in"] = eval::full_house(lay.f1(), box.f1());
    row["layout_counts"] = counts_json(lay);
    row["box_counts"] = counts_json(box);
    j.push_back(std::move(row));
  }
  return j;
}

Json to_json(const EvalReport& r) {
  Json j;
  j["config"] = to_json(r.config);
  j["seed"] = r.config.seed;
  j["step"] = r.step;
  j["thresholds"] = r.thresholds;
  j["metrics"] = metrics_json(pooled(r.scenes), r.thresholds);
  Json scenes = Json::array();
  for (std::size_t i = 0; i < r.scenes.size(); ++i) {
    const auto& s = r.scenes[i];
    Json sj;
    sj["id"] = s.id;
    sj["dsl"] = s.dsl;
    sj["metrics"] = metrics_json(s.metrics, r.thresholds);
    sj["baseline_metrics"] = metrics_json(r.baseline[i], r.thresholds);
    Json st;
    st["opening_width"] = s.stats.opening_width ? Json(*s.stats.opening_width) : Json(nullptr);
    st["furniture_count"] = s.stats.furniture_count;
    st["visible_points"] = s.stats.visible_points;
    sj["stats"] = std::move(st);
    scenes.push_back(std::move(sj));
  }
  j["scenes"] = std::move(scenes);
  Json slices = Json::array();
  for (const auto& s : r.slices) {
    Json sj;
    sj["slice"] = std::string(eval::slice_name(s.kind));
    sj["metric"] = s.metric;
    sj["scenes"] = s.scenes;
    sj["baseline"] = s.baseline;
    sj["ours"] = s.ours;
    sj["delta"] = s.delta;
    slices.push_back(std::move(sj));
  }
  j["slices"] = std::move(slices);
  return j;
}

std::string render_eval_table(const EvalReport& r) {
  std::ostringstream os;
  const auto total = pooled(r.scenes);
  os << "variant " << variant_name(r.config.variant) << ", step " << r.step << ", "
     << r.scenes.size() << " scenes\n";
  os << "IoU   | layout F1 | box F1 | layout miss | box miss | full-house (stand-in)\n";
  for (double t : r.thresholds) {
    const auto lay = counts_at(total.layout, t);
    const auto box = counts_at(total.box, t);
    os << fixed(t, 2) << "  | " << fixed(lay.f1()) << "    | " << fixed(box.f1()) << " | "
       << fixed(lay.miss_rate()) << "      | " << fixed(box.miss_rate()) << "   | "
       << fixed(eval::full_house(lay.f1(), box.f1())) << "\n";
  }
  if (!r.slices.empty()) {
    os << "\nslice               | metric                 | baseline | ours   | delta\n";
    for (const auto& s : r.slices) {
      std::string name(eval::slice_name(s.kind));
      name.resize(19, ' ');
      std::string metric = s.metric;
      metric.resize(std::max<std::size_t>(metric.size(), 22), ' ');
      os << name << " | " << metric << " | " << fixed(s.baseline) << "   | " << fixed(s.ours)
         << " | " << (s.delta >= 0 ? "+" : "") << fixed(s.delta) << "  (" << s.scenes.size()
         << " scenes)\n";
    }
    os << "baseline: same checkpoint with semantic colors cleared\n";
  }
  return os.str();
}

}  // namespace semshift::harness
