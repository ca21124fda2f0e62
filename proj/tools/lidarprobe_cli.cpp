// Copyright 2026 The lidarprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lidarprobe/config.hpp"
#include "lidarprobe/errors.hpp"
#include "lidarprobe/parallel.hpp"
#include "lidarprobe/pipeline.hpp"
#include "lidarprobe/reproduce.hpp"

namespace fs = std::filesystem;
using namespace lidarprobe;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string debug_dir;
};

pipeline::StageOptions make_options(const GlobalFlags& g) {
  pipeline::StageOptions opts;
  if (!g.config_path.empty()) opts.config = load_pipeline_config(g.config_path);
  if (g.seed) opts.config.seed = *g.seed;
  if (g.threads > 0) opts.config.threads = g.threads;
  opts.config.validate();
  set_thread_count(opts.config.threads);
  if (!g.debug_dir.empty()) opts.debug_dir = fs::path(g.debug_dir);
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lidarprobe: 2D LiDAR calibration, chest surface reconstruction and probe pose initialization"};
  app.set_version_flag("--version", std::string(LIDARPROBE_VERSION));
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--config", g.config_path, "Pipeline configuration JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the configured seed");
  app.add_option("--threads", g.threads, "Maximum worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--debug-dir", g.debug_dir, "Directory for intermediate clouds");

  std::string scenario, out, dataset, recordings, extrinsics, raw, origins, cloud, template_dir, source, reference,
      trials;

  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic dataset from a scenario file");
  sim->add_option("--scenario", scenario, "Scenario JSON")->required();
  sim->add_option("--out", out, "Output directory")->required();

  CLI::App* cal = app.add_subcommand("calibrate", "Estimate the scanner-to-tool extrinsics");
  cal->add_option("--dataset", dataset, "Calibration dataset directory")->required();
  cal->add_option("--out", out, "Output calibration.json path")->required();

  CLI::App* rec = app.add_subcommand("reconstruct", "Accumulate sweep recordings into a base-frame cloud");
  rec->add_option("--recordings", recordings, "Sweep dataset directory")->required();
  rec->add_option("--extrinsics", extrinsics, "calibration.json or truth.json")->required();
  rec->add_option("--out", out, "Output directory")->required();

  CLI::App* pre = app.add_subcommand("preprocess", "Filter, segment and resurface a raw cloud");
  pre->add_option("--input", raw, "Raw cloud PLY")->required();
  pre->add_option("--origins", origins, "Per-point sensor origins PLY");
  pre->add_option("--out", out, "Output PLY path")->required();

  CLI::App* match = app.add_subcommand("match", "Register a template and estimate the probe pose");
  match->add_option("--input", cloud, "Preprocessed cloud PLY")->required();
  match->add_option("--template", template_dir, "Template directory (defaults to config template_dir)");
  match->add_option("--out", out, "Output probe_pose.json path")->required();

  CLI::App* ev = app.add_subcommand("eval", "Evaluate surface error or probe repeatability");
  ev->add_option("--source", source, "Cloud to evaluate");
  ev->add_option("--reference", reference, "Ground-truth cloud");
  ev->add_option("--trials", trials, "Trials CSV with header subject,trial,e_parallel_mm");
  ev->add_option("--out", out, "Output directory")->required();

  CLI::App* rep = app.add_subcommand("reproduce", "Run the simulated calibration, surface and repeatability studies");
  rep->add_option("--out", out, "Report bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const pipeline::StageOptions opts = make_options(g);
    if (sim->parsed()) {
      pipeline::cmd_simulate(scenario, out, opts, g.seed);
    } else if (cal->parsed()) {
      const calibration::CalibrationReport report = pipeline::cmd_calibrate(dataset, out, opts);
      std::printf("overall RMS %.4f mm over %zu poses\n", report.overall_rms_mm, report.per_pose_rms_mm.size());
    } else if (rec->parsed()) {
      pipeline::cmd_reconstruct(recordings, extrinsics, out, opts);
    } else if (pre->parsed()) {
      std::optional<fs::path> o;
      if (!origins.empty()) o = fs::path(origins);
      pipeline::cmd_preprocess(raw, o, out, opts);
    } else if (match->parsed()) {
      fs::path dir = template_dir.empty() ? opts.config.template_dir : fs::path(template_dir);
      if (dir.empty()) fail(ErrorKind::kInvalidInput, "match needs --template or a config template_dir");
      const registration::ProbePose pose = pipeline::cmd_match(cloud, dir, out, opts);
      std::printf("probe point %.4f %.4f %.4f m, fitness %.4f, scale %.2f, converged %s\n", pose.position.x(),
                  pose.position.y(), pose.position.z(), pose.outcome.fitness, pose.outcome.scale_used,
                  pose.converged ? "true" : "false");
    } else if (ev->parsed()) {
      if (!trials.empty()) {
        const metrics::RepeatabilityReport r = pipeline::cmd_eval_trials(trials, out, opts);
        std::printf("%s = %.4f\n", std::string(metrics::to_string(r.form)).c_str(), r.icc);
      } else if (!source.empty() && !reference.empty()) {
        const metrics::SurfaceErrorReport r = pipeline::cmd_eval_clouds(source, reference, out, opts);
        std::printf("e_RMSE %.3f mm, e_95 %.3f mm, coverage %.2f%%\n", r.e_rmse * 1e3, r.e_95 * 1e3,
                    100.0 * r.coverage);
      } else {
        fail(ErrorKind::kInvalidInput, "eval needs --trials or both --source and --reference");
      }
    } else if (rep->parsed()) {
      const reproduce::ReproduceReport report = reproduce::run_reproduce(opts.config);
      reproduce::write_bundle(out, report, opts.config);
      pipeline::write_manifest(out, {"reproduce", {}, {fs::path(out) / "report.md", fs::path(out) / "summary.json"},
                                     config_hash(opts.config), opts.config.seed});
      std::printf("report bundle written to %s\n", out.c_str());
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << '\n';
    return 5;
  }
  return 0;
}
