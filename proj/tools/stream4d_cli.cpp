#include "stream4d/errors.hpp"
#include "stream4d/pipeline/commands.hpp"
#include "stream4d/pipeline/config.hpp"
#include "stream4d/pipeline/manifest.hpp"
#include "stream4d/synth/scene_json.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace stream4d;
namespace fs = std::filesystem;

struct Options {
  std::string manifest;
  std::string config;
  std::string out;
  std::string scene;
  std::string pred;
  std::optional<std::string> stage;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  std::optional<double> gamma;
  int repeats = 3;
};

io::RunConfig resolve_config(const Options& o) {
  io::RunConfig c = o.config.empty() ? io::RunConfig{} : io::load_config(o.config);
  if (o.stage) c.stage = io::parse_stage(*o.stage);
  if (o.seed) c.seed = *o.seed;
  if (o.tau) c.flow_threshold = *o.tau;
  if (o.gamma) c.confidence_threshold = *o.gamma;
  c.validate();
  return c;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming 4D reconstruction from multi-camera sequences"};
  app.require_subcommand(1);
  Options o;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "Dataset manifest (JSON)");
    sub->add_option("--config", o.config, "Run configuration (JSON)");
    sub->add_option("--stage", o.stage, "temporal or spatial");
    sub->add_option("--seed", o.seed, "Seed");
    sub->add_option("--tau", o.tau, "Flow residual threshold in pixels");
    sub->add_option("--gamma", o.gamma, "Confidence filter threshold");
  };

  CLI::App* synth_cmd = app.add_subcommand("synth", "Render a synthetic dataset");
  synth_cmd->add_option("--scene", o.scene, "Scene description (JSON); default scene if omitted");
  synth_cmd->add_option("--out", o.out, "Output directory")->required();
  synth_cmd->add_option("--seed", o.seed, "Scene seed");

  CLI::App* rec_cmd = app.add_subcommand("reconstruct", "Run the streaming reconstruction");
  add_run_flags(rec_cmd);
  rec_cmd->add_option("--out", o.out, "Output directory")->required();

  CLI::App* masks_cmd = app.add_subcommand("masks", "Predict dynamic masks only");
  add_run_flags(masks_cmd);
  masks_cmd->add_option("--out", o.out, "Output directory")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a reconstruction");
  eval_cmd->add_option("--pred", o.pred, "Output directory of reconstruct")->required();
  eval_cmd->add_option("--manifest", o.manifest, "Ground-truth manifest")->required();
  eval_cmd->add_option("--gamma", o.gamma, "Confidence filter threshold");
  eval_cmd->add_option("--out", o.out, "Write the report to this file");

  CLI::App* bench_cmd = app.add_subcommand("bench", "Time repeated reconstructions");
  add_run_flags(bench_cmd);
  bench_cmd->add_option("--repeats", o.repeats, "Number of runs (median reported)");
  bench_cmd->add_option("--out", o.out, "Write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    nlohmann::json report;
    if (synth_cmd->parsed()) {
      synth::SceneSpec scene = o.scene.empty() ? synth::default_scene() : synth::load_scene(o.scene);
      if (o.seed) scene.seed = *o.seed;
      report = pipeline::cmd_synth(scene, o.out);
    } else if (rec_cmd->parsed()) {
      require(o.manifest, "--manifest");
      report = pipeline::cmd_reconstruct(o.manifest, resolve_config(o), o.out);
    } else if (masks_cmd->parsed()) {
      require(o.manifest, "--manifest");
      report = pipeline::cmd_masks(o.manifest, resolve_config(o), o.out);
    } else if (eval_cmd->parsed()) {
      report = pipeline::cmd_eval(o.pred, o.manifest, o.gamma.value_or(1.5));
      if (!o.out.empty()) pipeline::write_json(o.out, report);
    } else if (bench_cmd->parsed()) {
      require(o.manifest, "--manifest");
      report = pipeline::cmd_bench(o.manifest, resolve_config(o), o.repeats);
      if (!o.out.empty()) pipeline::write_json(o.out, report);
    }
    if (report.contains("per_frame")) report.erase("per_frame");
    std::cout << report.dump(2) << std::endl;
    if (report.contains("warning")) std::cerr << "warning: " << report["warning"] << std::endl;
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << std::endl;
    return 1;
  }
}
