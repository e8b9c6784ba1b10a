#include <array>
#include <charconv>
#include <cmath>
#include <utility>

#include "semshift/harness.hpp"
#include "semshift/lift.hpp"
#include "semshift/rng.hpp"

namespace semshift::harness {

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 7> kVariants{{
    {Variant::Full, "full"},
    {Variant::NoRatio, "no_ratio"},
    {Variant::NoBudget, "no_budget"},
    {Variant::NoEntropy, "no_entropy"},
    {Variant::RandomColor, "random_color"},
    {Variant::ColorPerturb, "color_perturb"},
    {Variant::NoShift, "no_shift"},
}};

template <typename T>
void read_key(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string_view variant_name(Variant v) {
  for (const auto& [k, name] : kVariants)
    if (k == v) return name;
  return "full";
}

std::optional<Variant> variant_from_name(std::string_view name) {
  for (const auto& [k, n] : kVariants)
    if (n == name) return k;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("train.steps must be >= 0");
  if (batch < 1) throw std::invalid_argument("train.batch must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train.lr must be positive");
}

void RunConfig::validate() const {
  encoder.validate();
  shift.validate();
  decoder.validate();
  train.validate();
  if (shift.channels != encoder.channels)
    throw std::invalid_argument("shift.channels must equal encoder.channels");
  if (decoder.voxel_size != encoder.voxel_size)
    throw std::invalid_argument("decoder.voxel_size must equal encoder.voxel_size");
}

ShiftConfig RunConfig::effective_shift() const {
  ShiftConfig s = shift;
  s.seed = seed;
  switch (variant) {
    case Variant::NoRatio: s.weights.ratio = 0.0; break;
    case Variant::NoBudget: s.weights.budget = 0.0; break;
    case Variant::NoEntropy: s.weights.ent = 0.0; break;
    case Variant::NoShift: s.alpha = 0.0; break;
    default: break;
  }
  return s;
}

Json to_json(const RunConfig& c) {
  Json j;
  Json enc;
  enc["voxel_size"] = c.encoder.voxel_size;
  enc["channels"] = c.encoder.channels;
  enc["hidden"] = c.encoder.hidden;
  enc["seed"] = c.encoder.seed;
  enc["d_raw"] = c.encoder.d_raw;
  enc["position_scale"] = c.encoder.position_scale;
  j["encoder"] = std::move(enc);

  Json sh;
  sh["channels"] = c.shift.channels;
  sh["router_hidden"] = c.shift.router_hidden;
  sh["delta_hidden"] = c.shift.delta_hidden;
  sh["aux_hidden"] = c.shift.aux_hidden;
  sh["alpha"] = c.shift.alpha;
  sh["lambda_ratio"] = c.shift.weights.ratio;
  sh["lambda_budget"] = c.shift.weights.budget;
  sh["lambda_ent"] = c.shift.weights.ent;
  sh["epsilon"] = c.shift.epsilon;
  sh["zero_empty_deltas"] = c.shift.zero_empty_deltas;
  j["shift"] = std::move(sh);

  Json dec;
  dec["route_threshold"] = c.decoder.route_threshold;
  dec["min_cluster"] = c.decoder.min_cluster;
  dec["cluster_link_radius"] = c.decoder.cluster_link_radius;
  dec["voxel_size"] = c.decoder.voxel_size;
  dec["wall_inlier_tol"] = c.decoder.wall_inlier_tol;
  dec["door_floor_tol"] = c.decoder.door_floor_tol;
  dec["min_wall_height"] = c.decoder.min_wall_height;
  j["decoder"] = std::move(dec);

  Json tr;
  tr["steps"] = c.train.steps;
  tr["batch"] = c.train.batch;
  tr["lr"] = c.train.lr;
  j["train"] = std::move(tr);

  j["manifest"] = c.manifest;
  j["out_dir"] = c.out_dir;
  j["seed"] = c.seed;
  j["variant"] = std::string(variant_name(c.variant));
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  if (!j.is_object()) throw io::IoError("config: expected an object");
  try {
    if (j.contains("encoder")) {
      const Json& e = j.at("encoder");
      read_key(e, "voxel_size", c.encoder.voxel_size);
      read_key(e, "channels", c.encoder.channels);
      read_key(e, "hidden", c.encoder.hidden);
      read_key(e, "seed", c.encoder.seed);
      read_key(e, "d_raw", c.encoder.d_raw);
      read_key(e, "position_scale", c.encoder.position_scale);
    }
    if (j.contains("shift")) {
      const Json& s = j.at("shift");
      read_key(s, "channels", c.shift.channels);
      read_key(s, "router_hidden", c.shift.router_hidden);
      read_key(s, "delta_hidden", c.shift.delta_hidden);
      read_key(s, "aux_hidden", c.shift.aux_hidden);
      read_key(s, "alpha", c.shift.alpha);
      read_key(s, "lambda_ratio", c.shift.weights.ratio);
      read_key(s, "lambda_budget", c.shift.weights.budget);
      read_key(s, "lambda_ent", c.shift.weights.ent);
      read_key(s, "epsilon", c.shift.epsilon);
      read_key(s, "zero_empty_deltas", c.shift.zero_empty_deltas);
    }
    if (j.contains("decoder")) {
      const Json& d = j.at("decoder");
      read_key(d, "route_threshold", c.decoder.route_threshold);
      read_key(d, "min_cluster", c.decoder.min_cluster);
      read_key(d, "cluster_link_radius", c.decoder.cluster_link_radius);
      read_key(d, "voxel_size", c.decoder.voxel_size);
      read_key(d, "wall_inlier_tol", c.decoder.wall_inlier_tol);
      read_key(d, "door_floor_tol", c.decoder.door_floor_tol);
      read_key(d, "min_wall_height", c.decoder.min_wall_height);
    }
    if (j.contains("train")) {
      const Json& t = j.at("train");
      read_key(t, "steps", c.train.steps);
      read_key(t, "batch", c.train.batch);
      read_key(t, "lr", c.train.lr);
    }
    read_key(j, "manifest", c.manifest);
    read_key(j, "out_dir", c.out_dir);
    read_key(j, "seed", c.seed);
    if (j.contains("variant")) {
      const auto name = j.at("variant").get<std::string>();
      const auto v = variant_from_name(name);
      if (!v) throw io::IoError("config: unknown variant '" + name + "'");
      c.variant = *v;
    }
  } catch (const nlohmann::json::exception& e) {
    throw io::IoError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  try {
    return run_config_from_json(Json::parse(io::read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw io::IoError("'" + path.string() + "': " + e.what());
  }
}

SemanticPointCloud variant_colors(const SemanticPointCloud& cloud, Variant v, std::uint64_t seed) {
  switch (v) {
    case Variant::RandomColor: return random_color_control(cloud, mix_seed(seed, 0x7263));
    case Variant::ColorPerturb: return perturb_color_map(cloud, mix_seed(seed, 0x6370));
    default: return cloud;
  }
}

Json to_json(const LossBreakdown& l) {
  Json j;
  j["l_ratio"] = std::isfinite(l.l_ratio) ? Json(l.l_ratio) : Json("inf");
  j["l_budget"] = l.l_budget;
  j["l_ent"] = l.l_ent;
  j["total"] = std::isfinite(l.total) ? Json(l.total) : Json("inf");
  j["lambda_ratio"] = l.weights.ratio;
  j["lambda_budget"] = l.weights.budget;
  j["lambda_ent"] = l.weights.ent;
  j["epsilon"] = l.epsilon;
  return j;
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed,
                               digits);
  std::string s(buf.data(), r.ptr);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace semshift::harness
