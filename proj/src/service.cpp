#include "semshift/service.hpp"

#include <cmath>

#include "semshift/lift.hpp"

namespace semshift::service {

Response error(int status, std::string code, std::string message, Json detail) {
  Json j;
  j["code"] = std::move(code);
  j["message"] = std::move(message);
  j["detail"] = std::move(detail);
  return {status, std::move(j)};
}

void FifoGate::enter() {
  std::unique_lock lock(m_);
  const std::uint64_t ticket = next_++;
  cv_.wait(lock, [&] { return serving_ == ticket; });
}

void FifoGate::leave() {
  {
    std::lock_guard lock(m_);
    ++serving_;
  }
  cv_.notify_all();
}

namespace {

struct GateGuard {
  explicit GateGuard(FifoGate& g) : gate(g) { gate.enter(); }
  ~GateGuard() { gate.leave(); }
  FifoGate& gate;
};

std::vector<synth::SceneBundle> load_bundles(const io::Manifest& m) {
  std::vector<synth::SceneBundle> out;
  for (const auto& e : m.scenes) out.push_back(io::read_bundle(m.resolve(e)));
  return out;
}

std::optional<std::string> suffix_after(std::string_view path, std::string_view prefix) {
  if (path.substr(0, prefix.size()) != prefix) return std::nullopt;
  auto rest = path.substr(prefix.size());
  if (rest.empty() || rest.find('/') != std::string_view::npos) return std::nullopt;
  return std::string(rest);
}

Response unknown_scene(const std::string& id) {
  Json d;
  d["id"] = id;
  return error(404, "not_found", "unknown scene id", d);
}

}  // namespace

Service::Service(harness::Model model, const io::Manifest& manifest)
    : Service(std::move(model), manifest.scenes, load_bundles(manifest)) {}

Service::Service(harness::Model model, std::vector<io::ManifestEntry> entries,
                 std::vector<synth::SceneBundle> bundles)
    : model_(std::move(model)) {
  if (entries.size() != bundles.size()) throw std::invalid_argument("service: one bundle per entry");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    SceneState s;
    s.entry = std::move(entries[i]);
    s.bundle = std::move(bundles[i]);
    s.current = s.bundle.cloud;
    if (!index_.emplace(s.entry.id, scenes_.size()).second)
      throw std::invalid_argument("service: duplicate scene id " + s.entry.id);
    scenes_.push_back(std::move(s));
  }
}

const Service::SceneState* Service::find(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &scenes_[it->second];
}

Service::SceneState* Service::find(const std::string& id) {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &scenes_[it->second];
}

Json Service::semantic_json(const SceneState& s) const {
  Json j;
  j["mode"] = s.semantic.mode;
  j["instance_id"] = s.semantic.instance_id ? Json(*s.semantic.instance_id) : Json(nullptr);
  j["intensity"] = s.semantic.intensity;
  return j;
}

Json Service::color_summary(const SceneState& s) const {
  std::array<std::size_t, 4> counts{};
  for (const auto& p : s.current.points) ++counts[static_cast<std::size_t>(group_of_color(p.color))];
  Json j;
  j["id"] = s.entry.id;
  const Json sem = semantic_json(s);
  for (const auto& [k, v] : sem.items()) j[k] = v;
  Json c;
  c["furniture"] = counts[0];
  c["wall"] = counts[1];
  c["opening"] = counts[2];
  c["other"] = counts[3];
  j["counts"] = std::move(c);
  j["points"] = s.current.size();
  return j;
}

Response Service::list_scenes() const {
  std::shared_lock lock(mu_);
  Json out = Json::array();
  for (const auto& s : scenes_) {
    Json j;
    j["id"] = s.entry.id;
    j["path"] = s.entry.path;
    Json st;
    st["seed"] = s.entry.seed;
    st["points"] = s.bundle.cloud.size();
    st["walls"] = s.bundle.scene.walls.size();
    st["openings"] = s.bundle.scene.openings.size();
    st["boxes"] = s.bundle.scene.boxes.size();
    j["stats"] = std::move(st);
    out.push_back(std::move(j));
  }
  return {200, std::move(out)};
}

Response Service::get_scene(const std::string& id) const {
  std::shared_lock lock(mu_);
  const SceneState* s = find(id);
  if (!s) return unknown_scene(id);
  Json j;
  j["id"] = id;
  j["scene"] = io::to_json(s->bundle.scene);
  Json x = Json::array(), y = Json::array(), color = Json::array(), inst = Json::array();
  for (const auto& p : s->current.points) {
    x.push_back(p.pos.x);
    y.push_back(p.pos.y);
    color.push_back(Json::array({p.color.r, p.color.g, p.color.b}));
    inst.push_back(p.instance_id ? Json(*p.instance_id) : Json(nullptr));
  }
  Json pts;
  pts["x"] = std::move(x);
  pts["y"] = std::move(y);
  pts["color"] = std::move(color);
  pts["instance_id"] = std::move(inst);
  j["points"] = std::move(pts);
  j["semantic"] = semantic_json(*s);
  return {200, std::move(j)};
}

Response Service::get_metrics(const std::string& id) const {
  std::shared_lock lock(mu_);
  const SceneState* s = find(id);
  if (!s) return unknown_scene(id);
  if (!s->last_metrics) {
    Json d;
    d["id"] = id;
    return error(404, "no_metrics", "scene has not been decoded yet", d);
  }
  return {200, *s->last_metrics};
}

Response Service::post_semantic(const Json& req) {
  GateGuard gate(gate_);
  std::unique_lock lock(mu_);
  if (!req.is_object() || !req.contains("id") || !req["id"].is_string())
    return error(400, "bad_request", "field 'id' (string) is required");
  const std::string id = req["id"].get<std::string>();
  SceneState* s = find(id);
  if (!s) return unknown_scene(id);
  if (!req.contains("mode") || !req["mode"].is_string())
    return error(400, "bad_request", "field 'mode' (string) is required");
  Semantic next;
  next.mode = req["mode"].get<std::string>();
  if (next.mode != "full" && next.mode != "target_only" && next.mode != "clear") {
    Json d;
    d["mode"] = next.mode;
    return error(400, "bad_request", "mode must be target_only, full or clear", d);
  }
  if (req.contains("intensity")) {
    if (!req["intensity"].is_number()) return error(400, "bad_request", "intensity must be a number");
    next.intensity = req["intensity"].get<double>();
    if (!(next.intensity >= 0.0 && next.intensity <= 1.0)) {
      Json d;
      d["intensity"] = req["intensity"];
      return error(400, "bad_request", "intensity must lie in [0, 1]", d);
    }
  }
  if (next.mode == "target_only") {
    if (!req.contains("instance_id") || !req["instance_id"].is_number_integer())
      return error(400, "bad_request", "target_only requires an integer instance_id");
    const int inst = req["instance_id"].get<int>();
    bool found = false;
    for (const auto& p : s->bundle.cloud.points) found = found || p.instance_id == inst;
    if (!found) {
      Json d;
      d["instance_id"] = inst;
      return error(404, "not_found", "unknown instance in this scene", d);
    }
    next.instance_id = inst;
    s->current = scale_intensity(make_target_only(s->bundle.cloud, inst), next.intensity);
  } else if (next.mode == "full") {
    s->current = scale_intensity(s->bundle.cloud, next.intensity);
  } else {
    next.intensity = 0.0;
    s->current = scale_intensity(s->bundle.cloud, 0.0);
  }
  s->semantic = next;
  return {200, color_summary(*s)};
}

Response Service::post_decode(const Json& req) {
  GateGuard gate(gate_);
  std::unique_lock lock(mu_);
  if (!req.is_object() || !req.contains("id") || !req["id"].is_string())
    return error(400, "bad_request", "field 'id' (string) is required");
  const std::string id = req["id"].get<std::string>();
  SceneState* s = find(id);
  if (!s) return unknown_scene(id);

  const harness::Prediction p = harness::predict(model_, s->current);
  const std::vector<double> thresholds = eval::kDefaultThresholds;
  Json metrics;
  metrics["thresholds"] = harness::metrics_json(eval::evaluate_scene(p.scene, s->bundle.scene),
                                                thresholds);
  if (s->semantic.instance_id) {
    const OrientedBox& target = s->bundle.scene.boxes.at(static_cast<std::size_t>(*s->semantic.instance_id));
    const std::vector<std::vector<OrientedBox>> preds{p.scene.boxes};
    const std::vector<OrientedBox> targets{target};
    const auto run = eval::summarize_control(preds, targets);
    Json t;
    t["instance_id"] = *s->semantic.instance_id;
    t["hit"] = run.hits == 1;
    t["target_only"] = run.target_only == 1;
    t["boxes"] = run.boxes;
    metrics["target"] = std::move(t);
  } else {
    metrics["target"] = nullptr;
  }

  Json j;
  j["id"] = id;
  j["semantic"] = semantic_json(*s);
  j["dsl_text"] = p.dsl;
  const Json scene = io::to_json(p.scene);
  j["boxes"] = scene["boxes"];
  j["walls"] = scene["walls"];
  j["openings"] = scene["openings"];
  j["metrics_vs_gt"] = metrics;

  Json report;
  report["id"] = id;
  report["step"] = model_.checkpoint().step;
  report["semantic"] = semantic_json(*s);
  report["metrics_vs_gt"] = std::move(metrics);
  s->last_metrics = std::move(report);
  return {200, std::move(j)};
}

Response Service::handle(std::string_view method, std::string_view path, std::string_view body) {
  try {
    if (method == "GET") {
      if (path == "/scenes") return list_scenes();
      if (auto id = suffix_after(path, "/scene/")) return get_scene(*id);
      if (auto id = suffix_after(path, "/metrics/")) return get_metrics(*id);
    } else if (method == "POST") {
      if (path == "/semantic" || path == "/decode") {
        Json req;
        try {
          req = Json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
          return error(400, "bad_request", "request body is not valid JSON", e.what());
        }
        return path == "/semantic" ? post_semantic(req) : post_decode(req);
      }
    } else {
      Json d;
      d["method"] = std::string(method);
      return error(405, "method_not_allowed", "only GET and POST are served", d);
    }
    Json d;
    d["path"] = std::string(path);
    return error(404, "not_found", "no such endpoint", d);
  } catch (const std::exception& e) {
    return error(500, "internal", "request failed", e.what());
  }
}

}  // namespace semshift::service
