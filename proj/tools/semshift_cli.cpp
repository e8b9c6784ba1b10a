// Command-line entry point: synth, train, eval, sweep, serve.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "semshift/harness.hpp"
#include "semshift/io.hpp"
#include "semshift/service.hpp"

namespace fs = std::filesystem;
using namespace semshift;

namespace {

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io::IoError("cannot create '" + dir.string() + "': " + ec.message());
}

io::Manifest load_manifest(const std::string& path) {
  if (path.empty()) throw io::IoError("no manifest given (use --manifest or set it in the config)");
  return io::read_manifest(path);
}

int cmd_synth(const std::string& params_file, std::size_t count, std::uint64_t seed,
              const std::string& out) {
  synth::GenParams params;
  if (!params_file.empty()) {
    params = io::gen_params_from_json(io::Json::parse(io::read_text(params_file)));
  }
  params.validate();
  const auto m = io::synthesize_dataset(params, seed, count, out);
  std::cout << "wrote " << m.scenes.size() << " scenes and " << (fs::path(out) / "manifest.json").string()
            << "\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string manifest;
  std::string out;
  std::string variant;
  std::string resume;
  int steps = -1;
  long long seed = -1;
};

int cmd_train(const TrainArgs& a) {
  harness::RunConfig cfg;
  if (!a.config.empty()) cfg = harness::read_run_config(a.config);
  if (!a.manifest.empty()) cfg.manifest = a.manifest;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (!a.variant.empty()) {
    const auto v = harness::variant_from_name(a.variant);
    if (!v) throw std::invalid_argument("unknown variant '" + a.variant + "'");
    cfg.variant = *v;
  }
  if (a.steps >= 0) cfg.train.steps = a.steps;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  cfg.validate();

  std::optional<harness::Checkpoint> resume;
  if (!a.resume.empty()) resume = harness::read_checkpoint(a.resume);

  const auto manifest = load_manifest(cfg.manifest);
  const auto data = harness::prepare_training_data(cfg, manifest);
  ensure_dir(cfg.out_dir);
  const fs::path log_path = fs::path(cfg.out_dir) / "train_log.jsonl";
  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw io::IoError("cannot open '" + log_path.string() + "'");
  const auto ck = harness::train(cfg, data, resume, [&](const io::Json& row) { log << row.dump() << "\n"; });
  const fs::path ck_path = fs::path(cfg.out_dir) / "checkpoint.json";
  harness::write_checkpoint(ck_path, ck);
  const auto& f = *ck.final_loss;
  std::cout << "variant " << harness::variant_name(cfg.variant) << ", " << data.samples.size()
            << " scenes, " << ck.step << " steps\n"
            << "final l_ratio " << harness::fixed(f.l_ratio, 6) << "  l_budget "
            << harness::fixed(f.l_budget, 6) << "  l_ent " << harness::fixed(f.l_ent, 6) << "  total "
            << harness::fixed(f.total, 6) << "\n"
            << "checkpoint " << ck_path.string() << "\nlog " << log_path.string() << "\n";
  return 0;
}

std::vector<synth::SceneBundle> load_bundles(const io::Manifest& m, std::vector<std::string>& ids) {
  std::vector<synth::SceneBundle> out;
  for (const auto& e : m.scenes) {
    out.push_back(io::read_bundle(m.resolve(e)));
    ids.push_back(e.id);
  }
  return out;
}

int cmd_eval(const std::string& ckpt, const std::string& manifest_path, std::vector<double> thresholds,
             const std::string& out) {
  harness::Model model(harness::read_checkpoint(ckpt));
  const auto m = load_manifest(manifest_path.empty() ? model.config().manifest : manifest_path);
  const auto report = harness::run_eval(model, m, thresholds);
  const std::string table = harness::render_eval_table(report);
  const fs::path dir = out.empty() ? fs::path(model.config().out_dir) : fs::path(out);
  ensure_dir(dir);
  io::write_text(dir / "eval_report.json", harness::to_json(report).dump(2) + "\n");
  io::write_text(dir / "eval_report.txt", table);
  std::cout << table;
  return 0;
}

int cmd_sweep(const std::string& ckpt, const std::string& manifest_path, std::vector<double> intensities,
              const std::string& variant, const std::string& out) {
  auto ck = harness::read_checkpoint(ckpt);
  if (!variant.empty()) {
    const auto v = harness::variant_from_name(variant);
    if (!v) throw std::invalid_argument("unknown variant '" + variant + "'");
    // Only inference-time behaviour changes; the trained parameters stay as they are.
    ck.config.variant = *v;
    ck.params.alpha = ck.config.effective_shift().alpha;
  }
  harness::Model model(std::move(ck));
  const auto m = load_manifest(manifest_path.empty() ? model.config().manifest : manifest_path);
  std::vector<std::string> ids;
  const auto bundles = load_bundles(m, ids);
  harness::SweepSpec spec;
  if (!intensities.empty()) spec.intensities = intensities;
  const auto r = harness::run_sweep(model, bundles, ids, m.base_seed, spec);
  const std::string table = harness::render_sweep_table(r);
  const fs::path dir = out.empty() ? fs::path(model.config().out_dir) : fs::path(out);
  ensure_dir(dir);
  io::write_text(dir / "sweep.json", harness::to_json(r).dump(2) + "\n");
  io::write_text(dir / "sweep.txt", table);
  std::cout << table;
  return 0;
}

int cmd_serve(const std::string& ckpt, const std::string& manifest_path, const std::string& host, int port) {
  harness::Model model(harness::read_checkpoint(ckpt));
  const auto m = load_manifest(manifest_path.empty() ? model.config().manifest : manifest_path);
  service::Service svc(std::move(model), m);
  service::HttpServer server(svc);
  const int bound = server.bind(host, port);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "serving " << m.scenes.size() << " scenes on http://" << host << ":" << bound << std::endl;
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic shift toolkit: synthetic data, training, evaluation, sweeps, local service"};
  app.require_subcommand(1);

  std::string params_file, out;
  std::size_t count = 32;
  std::uint64_t seed = 1000;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset and its manifest");
  synth_cmd->add_option("--params", params_file, "generator parameters (JSON)")->check(CLI::ExistingFile);
  synth_cmd->add_option("--count", count, "number of scenes");
  synth_cmd->add_option("--seed", seed, "seed of the first scene");
  synth_cmd->add_option("--out", out, "output directory")->required();

  TrainArgs targs;
  auto* train_cmd = app.add_subcommand("train", "train the routed shift");
  train_cmd->add_option("--config", targs.config, "run config (JSON)")->check(CLI::ExistingFile);
  train_cmd->add_option("--manifest", targs.manifest, "dataset manifest");
  train_cmd->add_option("--out", targs.out, "output directory");
  train_cmd->add_option("--variant", targs.variant,
                        "full|no_ratio|no_budget|no_entropy|random_color|color_perturb|no_shift");
  train_cmd->add_option("--steps", targs.steps, "total steps");
  train_cmd->add_option("--seed", targs.seed, "run seed");
  train_cmd->add_option("--resume", targs.resume, "continue from this checkpoint")->check(CLI::ExistingFile);

  std::string ckpt, manifest, variant, host = "127.0.0.1";
  std::vector<double> thresholds{0.25, 0.5}, intensities;
  int port = 8765;
  auto* eval_cmd = app.add_subcommand("eval", "run the full pipeline and score it");
  eval_cmd->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--manifest", manifest, "defaults to the checkpoint's manifest");
  eval_cmd->add_option("--thresholds", thresholds)->delimiter(',');
  eval_cmd->add_option("--out", out, "report directory");

  auto* sweep_cmd = app.add_subcommand("sweep", "target-only intensity sweep");
  sweep_cmd->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--manifest", manifest, "defaults to the checkpoint's manifest");
  sweep_cmd->add_option("--intensities", intensities)->delimiter(',');
  sweep_cmd->add_option("--variant", variant, "inference-time override (no_shift sets alpha to 0)");
  sweep_cmd->add_option("--out", out, "output directory");

  auto* serve_cmd = app.add_subcommand("serve", "local JSON service for the control UI");
  serve_cmd->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--manifest", manifest, "defaults to the checkpoint's manifest");
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) return cmd_synth(params_file, count, seed, out);
    if (*train_cmd) return cmd_train(targs);
    if (*eval_cmd) return cmd_eval(ckpt, manifest, thresholds, out);
    if (*sweep_cmd) return cmd_sweep(ckpt, manifest, intensities, variant, out);
    if (*serve_cmd) return cmd_serve(ckpt, manifest, host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
