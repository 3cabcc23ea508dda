// detectrack command-line front end.
//
// Exit codes: 0 success, 1 usage, 2 parse error, 3 validation error,
// 4 runtime error.

#include "detectrack/bundle.hpp"
#include "detectrack/config.hpp"
#include "detectrack/gradcheck.hpp"
#include "detectrack/kitti_io.hpp"
#include "detectrack/pipeline.hpp"
#include "detectrack/synth.hpp"
#include "detectrack/training.hpp"
#include "detectrack/weights_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace dt = detectrack;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kParse = 2, kValidation = 3, kRuntime = 4 };

// Flags shared by the commands that build a tracker; set flags win over the
// config file.
struct RunFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> gate;
  std::optional<int> max_age;
  std::optional<double> spatial;
  std::optional<double> temporal;
  bool no_prune = false;
  bool ungated = false;
  std::optional<int> iterations;
  bool calibrate = false;
  std::optional<double> score_threshold;
  std::string weights;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "model initialization seed");
    cmd->add_option("--gate", gate, "minimum affinity for a match");
    cmd->add_option("--max-age", max_age, "missed frames before a track is dropped");
    cmd->add_option("--spatial", spatial, "spatial pruning distance in meters");
    cmd->add_option("--temporal", temporal, "temporal pruning distance in meters");
    cmd->add_flag("--no-prune", no_prune, "keep the fully connected graph");
    cmd->add_flag("--ungated", ungated, "uniform message weights instead of attention");
    cmd->add_option("--iterations", iterations, "message-passing iterations");
    cmd->add_flag("--calibrate", calibrate, "enable tracklet-aware score calibration");
    cmd->add_option("--score-threshold", score_threshold, "drop candidates scored below");
    cmd->add_option("-w,--weights", weights, "weight file to load")->check(CLI::ExistingFile);
  }

  dt::RunConfig resolve() const {
    dt::RunConfig cfg = config_path.empty() ? dt::RunConfig{} : dt::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (gate) cfg.lifecycle.gate = *gate;
    if (max_age) cfg.lifecycle.max_age = *max_age;
    if (spatial) cfg.pruning.spatial = *spatial;
    if (temporal) cfg.pruning.temporal = *temporal;
    if (no_prune) cfg.pruning_enabled = false;
    if (ungated) cfg.gnn.gating = false;
    if (iterations) cfg.gnn.iterations = *iterations;
    if (calibrate) cfg.calibration.enabled = true;
    if (score_threshold) cfg.score_threshold = *score_threshold;
    if (!weights.empty()) cfg.weights_input = weights;
    cfg.validate();
    return cfg;
  }
};

dt::ModelParams load_model(const dt::RunConfig& cfg, int feature_dim) {
  dt::ModelParams model = dt::ModelParams::create(cfg, feature_dim);
  if (!cfg.weights_input.empty()) {
    dt::ParamList params;
    model.append_params(params);
    dt::load_weights(cfg.weights_input, params);
  } else {
    std::cerr << "warning: no weight file given, using seeded initialization\n";
  }
  return model;
}

int cmd_synth(const dt::SceneSpec& spec, const std::string& out) {
  dt::save_bundle(dt::synth_scene(spec), out);
  std::cout << "wrote bundle " << out << '\n';
  return kOk;
}

int cmd_track(const RunFlags& flags, const std::string& bundle_dir, const std::string& out) {
  const dt::RunConfig cfg = flags.resolve();
  const dt::SequenceBundle bundle = dt::load_bundle(bundle_dir);
  const dt::ModelParams model = load_model(cfg, bundle.feature_dim);
  const dt::TrackRun run = dt::track_sequence(bundle, model, cfg);
  const auto records = dt::tracks_to_records(run.tracks);
  if (out.empty() || out == "-") {
    dt::write_kitti(std::cout, records);
  } else {
    dt::write_kitti_file(out, records);
    std::cerr << "wrote " << records.size() << " result lines to " << out << '\n';
  }
  return kOk;
}

int cmd_evaluate(const std::string& results, const std::string& gt_path,
                 const std::string& bundle_dir, const std::string& config_path,
                 std::optional<double> iou_threshold, const std::string& json_out,
                 const std::string& csv_out) {
  dt::RunConfig cfg = config_path.empty() ? dt::RunConfig{} : dt::load_config(config_path);
  if (iou_threshold) cfg.metrics.iou_threshold = *iou_threshold;
  cfg.validate();
  const auto pred_records = dt::parse_kitti_tracking_file(results);
  dt::SequenceObjects gt;
  int frames = 0;
  for (const auto& r : pred_records) frames = std::max(frames, r.frame + 1);
  if (!bundle_dir.empty()) {
    gt = dt::gt_sequence(dt::load_bundle(bundle_dir));
    frames = std::max(frames, static_cast<int>(gt.size()));
  } else {
    const auto gt_records = dt::parse_kitti_tracking_file(gt_path);
    for (const auto& r : gt_records) frames = std::max(frames, r.frame + 1);
    gt = dt::records_to_sequence(gt_records, frames);
  }
  gt.resize(static_cast<std::size_t>(frames));
  const dt::SequenceObjects preds = dt::records_to_sequence(pred_records, frames);
  const dt::MetricReport report = dt::evaluate(preds, gt, cfg.metrics);
  std::cout << dt::report_to_table(report);
  if (!json_out.empty()) {
    std::ofstream(json_out) << dt::report_to_json(report) << '\n';
  }
  if (!csv_out.empty()) {
    std::ofstream(csv_out) << dt::curve_to_csv(report);
  }
  return kOk;
}

int cmd_train(const RunFlags& flags, const std::vector<std::string>& bundle_dirs,
              std::optional<int> steps, std::optional<double> lr,
              const std::string& optimizer, const std::string& out, int log_every) {
  dt::RunConfig cfg = flags.resolve();
  if (steps) cfg.train.steps = *steps;
  if (lr) cfg.train.learning_rate = *lr;
  if (optimizer == "sgd") cfg.train.optimizer = dt::OptimizerKind::kSgd;
  if (optimizer == "adam") cfg.train.optimizer = dt::OptimizerKind::kAdam;
  if (!out.empty()) cfg.weights_output = out;
  cfg.validate();
  if (cfg.weights_output.empty()) throw dt::ConfigError("train: no output weight file given");

  std::vector<dt::SequenceBundle> bundles;
  for (const auto& dir : bundle_dirs) bundles.push_back(dt::load_bundle(dir));
  for (const auto& b : bundles) {
    if (b.feature_dim != bundles.front().feature_dim) {
      throw dt::ConfigError("train: bundles have different feature dimensions");
    }
  }
  dt::ModelParams model = dt::ModelParams::create(cfg, bundles.front().feature_dim);
  if (!cfg.weights_input.empty()) {
    dt::ParamList params;
    model.append_params(params);
    dt::load_weights(cfg.weights_input, params);
  }
  const auto history = dt::train(bundles, model, cfg, [&](int step, const dt::StepLoss& l) {
    if (log_every > 0 && (step % log_every == 0 || step + 1 == cfg.train.steps)) {
      std::printf("step %5d  loss %.6f  tracking %.6f  calibration %.6f\n", step, l.total,
                  l.tracking, l.calibration);
    }
  });
  dt::ParamList params;
  model.append_params(params);
  dt::save_weights(cfg.weights_output, params);
  std::cerr << "wrote weights to " << cfg.weights_output << '\n';
  return kOk;
}

int cmd_gradcheck(std::uint64_t seed, double tolerance) {
  bool ok = true;
  for (const auto& e : dt::run_gradcheck_suite(seed)) {
    const bool pass = e.max_rel_error < tolerance;
    ok = ok && pass;
    std::printf("%-4s %-40s %6ld params  max rel error %.3e\n", pass ? "ok" : "FAIL",
                e.block.c_str(), static_cast<long>(e.size), e.max_rel_error);
  }
  return ok ? kOk : kRuntime;
}

int cmd_graph_dump(const RunFlags& flags, const std::string& bundle_dir, int frame,
                   const std::string& out) {
  const dt::RunConfig cfg = flags.resolve();
  const dt::SequenceBundle bundle = dt::load_bundle(bundle_dir);
  if (frame < 0 || frame >= static_cast<int>(bundle.frames.size())) {
    throw dt::ConfigError("graph-dump: frame " + std::to_string(frame) + " out of range");
  }
  const dt::ModelParams model = load_model(cfg, bundle.feature_dim);
  dt::OnlineTracker tracker(model, cfg);
  dt::FrameResult r;
  for (int t = 0; t <= frame; ++t) r = tracker.step(bundle.frames[static_cast<std::size_t>(t)]);
  const std::string json = dt::graph_to_json(r.graph);
  if (out.empty() || out == "-") {
    std::cout << json << '\n';
  } else {
    std::ofstream(out) << json << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detectrack: joint detection and tracking on 3D boxes"};
  app.require_subcommand(1);

  dt::SceneSpec spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic sequence bundle");
  synth->add_option("-o,--out", synth_out, "output bundle directory")->required();
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--id", spec.sequence_id, "sequence id");
  synth->add_option("--objects", spec.objects, "number of objects");
  synth->add_option("--frames", spec.frames, "number of frames");
  synth->add_option("--area", spec.area, "side of the square scene in meters");
  synth->add_option("--pos-noise", spec.pos_noise, "center jitter std-dev in meters");
  synth->add_option("--feature-noise", spec.feature_noise, "embedding noise level");
  synth->add_option("--dropout", spec.dropout, "probability an object is missed");
  synth->add_option("--clutter", spec.clutter, "mean false candidates per frame");
  synth->add_option("--dim", spec.feature_dim, "embedding dimension");
  synth->add_flag("--maps", spec.with_maps, "also write BEV feature maps");

  RunFlags track_flags;
  std::string track_bundle, track_out;
  auto* track = app.add_subcommand("track", "run the tracker over a bundle");
  track->add_option("-b,--bundle", track_bundle, "bundle directory")->required();
  track->add_option("-o,--out", track_out, "KITTI result file (default stdout)");
  track_flags.add_to(track);

  std::string eval_results, eval_gt, eval_bundle, eval_config, eval_json, eval_csv;
  std::optional<double> eval_iou;
  auto* evaluate = app.add_subcommand("evaluate", "score KITTI results against GT");
  evaluate->add_option("-r,--results", eval_results, "KITTI result file")->required()->check(CLI::ExistingFile);
  auto* gt_opt = evaluate->add_option("-g,--gt", eval_gt, "KITTI label file")->check(CLI::ExistingFile);
  auto* bundle_opt = evaluate->add_option("-b,--bundle", eval_bundle, "bundle directory holding gt.txt");
  gt_opt->excludes(bundle_opt);
  evaluate->add_option("-c,--config", eval_config, "JSON run configuration")->check(CLI::ExistingFile);
  evaluate->add_option("--iou-threshold", eval_iou, "3D IoU needed for a match");
  evaluate->add_option("--json", eval_json, "write the report as JSON");
  evaluate->add_option("--csv", eval_csv, "write the recall curve as CSV");

  RunFlags train_flags;
  std::vector<std::string> train_bundles;
  std::optional<int> train_steps;
  std::optional<double> train_lr;
  std::string train_optimizer, train_out;
  int train_log_every = 50;
  auto* train = app.add_subcommand("train", "teacher-forced training on bundles");
  train->add_option("-b,--bundle", train_bundles, "bundle directories")->required();
  train->add_option("-o,--out", train_out, "output weight file");
  train->add_option("--steps", train_steps, "gradient steps");
  train->add_option("--lr", train_lr, "learning rate");
  train->add_option("--optimizer", train_optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
  train->add_option("--log-every", train_log_every, "print the loss every N steps (0: never)");
  train_flags.add_to(train);

  std::uint64_t gc_seed = 1;
  double gc_tolerance = 1e-5;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of all gradients");
  gradcheck->add_option("--seed", gc_seed, "seed for the random models and inputs");
  gradcheck->add_option("--tolerance", gc_tolerance, "maximum relative error");

  RunFlags dump_flags;
  std::string dump_bundle, dump_out;
  int dump_frame = 0;
  auto* dump = app.add_subcommand("graph-dump", "export the pruned graph of one frame as JSON");
  dump->add_option("-b,--bundle", dump_bundle, "bundle directory")->required();
  dump->add_option("--frame", dump_frame, "frame index");
  dump->add_option("-o,--out", dump_out, "output file (default stdout)");
  dump_flags.add_to(dump);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(spec, synth_out);
    if (*track) return cmd_track(track_flags, track_bundle, track_out);
    if (*evaluate) {
      if (eval_gt.empty() && eval_bundle.empty()) {
        std::cerr << "evaluate: one of --gt or --bundle is required\n";
        return kUsage;
      }
      return cmd_evaluate(eval_results, eval_gt, eval_bundle, eval_config, eval_iou, eval_json,
                          eval_csv);
    }
    if (*train) {
      return cmd_train(train_flags, train_bundles, train_steps, train_lr, train_optimizer,
                       train_out, train_log_every);
    }
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_tolerance);
    if (*dump) return cmd_graph_dump(dump_flags, dump_bundle, dump_frame, dump_out);
  } catch (const dt::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
