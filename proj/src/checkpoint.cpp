#include <cmath>
#include <limits>

#include "semshift/harness.hpp"

namespace semshift::harness {

namespace {

constexpr const char* kFormat = "semshift-checkpoint/1";

template <typename Derived>
Json tensor_json(const Eigen::MatrixBase<Derived>& t) {
  Json j;
  j["shape"] = Json::array({t.rows(), t.cols()});
  Json data = Json::array();
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
  j["data"] = std::move(data);
  return j;
}

template <typename Derived>
void tensor_from_json(const Json& j, const std::string& name, Eigen::MatrixBase<Derived>& t) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols())
    throw io::IoError("checkpoint: tensor '" + name + "' has the wrong shape");
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != t.rows() * t.cols())
    throw io::IoError("checkpoint: tensor '" + name + "' has the wrong length");
  std::size_t q = 0;
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = data[q++].get<double>();
}

LossBreakdown loss_from_json(const Json& j) {
  auto num = [&](const char* k) {
    const Json& v = j.at(k);
    return v.is_string() ? std::numeric_limits<double>::infinity() : v.get<double>();
  };
  LossBreakdown l;
  l.l_ratio = num("l_ratio");
  l.l_budget = num("l_budget");
  l.l_ent = num("l_ent");
  l.total = num("total");
  l.weights = {num("lambda_ratio"), num("lambda_budget"), num("lambda_ent")};
  l.epsilon = num("epsilon");
  l.ratio_infinite = !std::isfinite(l.l_ratio);
  return l;
}

}  // namespace

Json to_json(const Checkpoint& c) {
  Json j;
  j["format"] = kFormat;
  j["config"] = to_json(c.config);
  j["seed"] = c.config.seed;
  j["step"] = c.step;
  j["final_loss"] = c.final_loss ? to_json(*c.final_loss) : Json(nullptr);
  Json params;
  c.params.for_each_tensor([&](const std::string& name, const auto& t) { params[name] = tensor_json(t); });
  j["params"] = std::move(params);
  return j;
}

Checkpoint checkpoint_from_json(const Json& j) {
  Checkpoint c;
  try {
    if (j.at("format").get<std::string>() != kFormat)
      throw io::IoError("checkpoint: unsupported format");
    c.config = run_config_from_json(j.at("config"));
    c.config.validate();
    c.step = j.at("step").get<int>();
    if (c.step < 0) throw io::IoError("checkpoint: negative step");
    if (!j.at("final_loss").is_null()) c.final_loss = loss_from_json(j.at("final_loss"));
    c.params = ShiftParams::initialize(c.config.effective_shift());
    const Json& params = j.at("params");
    std::size_t seen = 0;
    c.params.for_each_tensor([&](const std::string& name, auto& t) {
      if (!params.contains(name)) throw io::IoError("checkpoint: missing tensor '" + name + "'");
      tensor_from_json(params.at(name), name, t);
      ++seen;
    });
    if (seen != params.size()) throw io::IoError("checkpoint: unexpected tensors");
  } catch (const nlohmann::json::exception& e) {
    throw io::IoError(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw io::IoError(std::string("checkpoint: ") + e.what());
  }
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  io::write_text(path, to_json(c).dump() + "\n");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(Json::parse(io::read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw io::IoError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace semshift::harness
