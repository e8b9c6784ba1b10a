// Thin pybind11 layer. Structured values cross as JSON text; point arrays as numpy.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "semshift/dsl.hpp"
#include "semshift/eval.hpp"
#include "semshift/harness.hpp"
#include "semshift/io.hpp"
#include "semshift/synth.hpp"

namespace py = pybind11;
using namespace semshift;
using io::Json;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMat positions(const synth::SceneBundle& b) {
  RowMat m(static_cast<Eigen::Index>(b.cloud.size()), 3);
  for (std::size_t i = 0; i < b.cloud.size(); ++i) {
    const auto& p = b.cloud.points[i].pos;
    m.row(static_cast<Eigen::Index>(i)) << p.x, p.y, p.z;
  }
  return m;
}

RowMat colors(const synth::SceneBundle& b) {
  RowMat m(static_cast<Eigen::Index>(b.cloud.size()), 3);
  for (std::size_t i = 0; i < b.cloud.size(); ++i) {
    const auto& c = b.cloud.points[i].color;
    m.row(static_cast<Eigen::Index>(i)) << c.r, c.g, c.b;
  }
  return m;
}

Eigen::VectorXi groups(const synth::SceneBundle& b) {
  Eigen::VectorXi v(static_cast<Eigen::Index>(b.cloud.size()));
  for (std::size_t i = 0; i < b.cloud.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = static_cast<int>(b.cloud.points[i].gt_group);
  return v;
}

OrientedBox box_from_json(const std::string& text) {
  const auto j = Json::parse(text);
  Json scene{{"walls", Json::array()}, {"openings", Json::array()}, {"boxes", Json::array({j})}};
  return io::scene_from_json(scene).boxes.at(0);
}

std::vector<synth::SceneBundle> collect(const std::vector<const synth::SceneBundle*>& in) {
  std::vector<synth::SceneBundle> out;
  out.reserve(in.size());
  for (const auto* b : in) out.push_back(*b);
  return out;
}

std::vector<std::string> ids_of(const std::vector<synth::SceneBundle>& bundles) {
  std::vector<std::string> ids;
  for (const auto& b : bundles) ids.push_back(io::scene_id(b.params.seed));
  return ids;
}

}  // namespace

PYBIND11_MODULE(_semshift, m) {
  m.doc() = "semantic-shift scene reconstruction core";

  py::register_exception<dsl::DslError>(m, "DslError", PyExc_ValueError);
  py::register_exception<io::IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<synth::InfeasibleParams>(m, "InfeasibleParams", PyExc_ValueError);

  py::class_<synth::SceneBundle>(m, "SceneBundle")
      .def_property_readonly("seed", [](const synth::SceneBundle& b) { return b.params.seed; })
      .def_property_readonly("positions", &positions)
      .def_property_readonly("colors", &colors)
      .def_property_readonly("gt_groups", &groups)
      .def_property_readonly("scene_json", [](const synth::SceneBundle& b) { return io::to_json(b.scene).dump(); })
      .def_property_readonly("dsl", [](const synth::SceneBundle& b) { return dsl::serialize(b.scene); })
      .def("__len__", [](const synth::SceneBundle& b) { return b.cloud.size(); });

  m.def("generate_scene", [](const std::string& params_json) {
    return synth::generate_scene(io::gen_params_from_json(Json::parse(params_json)));
  });
  m.def("read_bundle", [](const std::string& path) { return io::read_bundle(path); });
  m.def("write_bundle", [](const std::string& path, const synth::SceneBundle& b) { io::write_bundle(path, b); });

  m.def("dsl_parse", [](const std::string& text) { return io::to_json(dsl::parse(text)).dump(); });
  m.def("dsl_serialize", [](const std::string& scene_json) {
    return dsl::serialize(io::scene_from_json(Json::parse(scene_json)));
  });
  m.def("dsl_canonical", [](const std::string& text) { return dsl::canonical(text); });

  m.def("iou3d", [](const std::string& a, const std::string& b) { return eval::iou3d(box_from_json(a), box_from_json(b)); });
  m.def("evaluate_dsl", [](const std::string& pred, const std::string& gt) {
    return harness::metrics_json(eval::evaluate_scene(dsl::parse(pred), dsl::parse(gt)), eval::kDefaultThresholds)
        .dump();
  });

  m.def("default_config", [] { return harness::to_json(harness::RunConfig{}).dump(); });

  py::class_<harness::Model>(m, "Model")
      .def_static("from_checkpoint_json",
                  [](const std::string& text) { return harness::Model(harness::checkpoint_from_json(Json::parse(text))); })
      .def_static("load", [](const std::string& path) { return harness::Model(harness::read_checkpoint(path)); })
      .def("checkpoint_json", [](const harness::Model& mdl) { return harness::to_json(mdl.checkpoint()).dump(); })
      .def("save", [](const harness::Model& mdl, const std::string& path) { harness::write_checkpoint(path, mdl.checkpoint()); })
      .def("predict_dsl", [](const harness::Model& mdl, const synth::SceneBundle& b) { return harness::predict(mdl, b.cloud).dsl; })
      .def("routing", [](const harness::Model& mdl, const synth::SceneBundle& b) {
        return RowMat(harness::predict(mdl, b.cloud).routing.w);
      })
      .def("control_boxes", [](const harness::Model& mdl, const synth::SceneBundle& b, int target, double intensity) {
        Json out = Json::array();
        for (const auto& box : harness::control_decode(mdl, b.cloud, target, intensity)) out.push_back(io::to_json(box));
        return out.dump();
      });

  m.def(
      "train",
      [](const std::string& config_json, const std::vector<const synth::SceneBundle*>& bundles) {
        const auto cfg = harness::run_config_from_json(Json::parse(config_json));
        const auto owned = collect(bundles);
        const auto ids = ids_of(owned);
        py::gil_scoped_release release;
        return harness::Model(harness::train(cfg, harness::prepare_training_data(cfg, owned, ids)));
      },
      py::arg("config_json"), py::arg("bundles"));

  m.def("evaluate", [](const harness::Model& mdl, const std::vector<const synth::SceneBundle*>& bundles) {
    const auto owned = collect(bundles);
    const auto ids = ids_of(owned);
    py::gil_scoped_release release;
    return harness::to_json(harness::run_eval(mdl, owned, ids, eval::kDefaultThresholds)).dump();
  });
}
