// Command-line front end: map building, relocalization, localization,
// synthetic data and evaluation reports.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "polereloc/config.hpp"
#include "polereloc/evaluation.hpp"
#include "polereloc/extraction.hpp"
#include "polereloc/io.hpp"
#include "polereloc/localization.hpp"
#include "polereloc/registration.hpp"
#include "polereloc/relocalization.hpp"
#include "polereloc/sim.hpp"

namespace fs = std::filesystem;
using namespace polereloc;

namespace {

// sysexits-style codes.
constexpr int kExitRelocFailed = 3;
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;
constexpr int kExitIo = 74;
constexpr int kExitConfig = 78;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return kExitUsage;
    case ErrorKind::kData:
    case ErrorKind::kDegenerate:
      return kExitData;
    case ErrorKind::kIo:
      return kExitIo;
    case ErrorKind::kConfig:
      return kExitConfig;
  }
  return kExitData;
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

Config read_config(const std::string& path) { return path.empty() ? Config{} : load_config(path); }

double path_length(const std::vector<PoseRecord>& poses) {
  double length = 0.0;
  for (std::size_t i = 1; i < poses.size(); ++i) length += (poses[i].translation - poses[i - 1].translation).norm();
  return length;
}

// Odometry stream of a dataset: odometry.txt when present, else the poses.
PipelineInput pipeline_input(const Dataset& data) {
  const std::vector<PoseRecord>& odom = data.odometry.empty() ? data.poses : data.odometry;
  PipelineInput input;
  input.frames = data.frames;
  if (odom.empty()) return input;
  input.initial_pose = odom.front().pose();
  for (std::size_t k = 1; k < odom.size(); ++k) {
    input.increments.push_back({data.frames[k].timestamp, odom[k - 1].pose().inverse() * odom[k].pose()});
  }
  return input;
}

int cmd_build_map(const std::string& dataset, const std::string& config_path, const std::string& out,
                  bool no_points) {
  const Config cfg = read_config(config_path);
  const std::vector<PoseRecord> poses = load_poses(fs::path(dataset) / "poses.txt");
  const std::size_t frames = count_frames(dataset);
  if (frames != poses.size()) throw Error(ErrorKind::kData, "frame and pose counts differ");

  ClusterMap map;
  for (std::size_t k = 0; k < frames; ++k) {
    const Frame frame = load_dataset_frame(dataset, k, cfg.labels, poses[k].timestamp);
    register_frame(map, extract_clusters(frame, cfg.extraction), poses[k].pose(), cfg.registration);
  }
  save_map(map, out, cfg.labels, !no_points);
  const double length = path_length(poses);
  std::cout << "clusters " << map.size() << "\n";
  std::cout << "trajectory_length " << fixed(length, 3) << "\n";
  std::cout << "density " << (length > 0.0 ? fixed(cluster_density(map.size(), length), 4) : "n/a") << "\n";
  return 0;
}

int cmd_relocalize(const std::string& map_path, const std::string& dataset, std::size_t frame_index,
                   const std::string& config_path) {
  const Config cfg = read_config(config_path);
  const ClusterMap global = load_map(map_path);
  const std::vector<PoseRecord> poses = load_poses(fs::path(dataset) / "poses.txt");
  if (frame_index >= poses.size()) {
    throw Error(ErrorKind::kInvalidArgument, "frame " + std::to_string(frame_index) + " out of range");
  }
  const Frame frame = load_dataset_frame(dataset, frame_index, cfg.labels, poses[frame_index].timestamp);
  const ClusterMap local = build_local_map(extract_clusters(frame, cfg.extraction), PoseSE3::Identity());
  const RelocOutcome outcome = relocalize(local, global, cfg.association, cfg.reloc);

  nlohmann::ordered_json record;
  record["frame"] = frame_index;
  record["timestamp"] = frame.timestamp;
  record["local_clusters"] = local.size();
  record["associated_pairs"] = outcome.associated_pairs;
  record["success"] = outcome.ok();
  if (outcome.ok()) {
    const RelocResult& r = *outcome.result;
    const Eigen::Quaterniond q = r.pose.quaternion();
    record["translation"] = {r.pose.translation().x(), r.pose.translation().y(), r.pose.translation().z()};
    record["quaternion"] = {q.x(), q.y(), q.z(), q.w()};
    record["residual_rms"] = r.residual_rms;
    auto pairs = nlohmann::ordered_json::array();
    for (const MatchPair& p : r.inlier_pairs) pairs.push_back({p.local_id, p.global_id});
    record["inliers"] = pairs;
  } else {
    record["reason"] = to_string(outcome.failure);
  }
  std::cout << record.dump() << "\n";
  return outcome.ok() ? 0 : kExitRelocFailed;
}

int cmd_localize(const std::string& map_path, const std::string& dataset, const std::string& out,
                 const std::string& config_path, bool no_reloc) {
  Config cfg = read_config(config_path);
  if (no_reloc) cfg.pipeline.relocalization_enabled = false;
  const ClusterMap global = load_map(map_path);
  const Dataset data = load_dataset(dataset, cfg.labels);
  const PipelineResult result = run_pipeline(pipeline_input(data), global, cfg.settings());
  save_poses(out, to_records(result.trajectory));

  std::size_t attempts = result.events.size();
  std::cout << "frames " << result.trajectory.size() << "\n";
  std::cout << "reloc_attempts " << attempts << "\n";
  std::cout << "fixes_applied " << result.fixes_applied << "\n";
  if (!data.poses.empty()) {
    std::cout << "rmse " << fixed(evaluate_localization(to_stamped(data.poses), result.trajectory)) << "\n";
  }
  return 0;
}

int cmd_simulate(const std::string& scene_config, const std::string& out) {
  const Config cfg = read_config(scene_config);
  const Scene scene = generate_scene(cfg.scene);
  const SimRun run = simulate_run(scene, cfg.run, cfg.drift);
  Dataset data;
  data.frames = run.frames;
  data.poses = to_records(run.ground_truth);
  data.odometry = to_records(run.odometry);
  save_dataset(out, data, cfg.labels);
  save_map(scene.map, fs::path(out) / "scene.map", cfg.labels);
  std::cout << "frames " << data.frames.size() << "\n";
  std::cout << "landmarks " << scene.landmarks.size() << "\n";
  return 0;
}

std::vector<double> parse_retentions(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_double(item));
    } catch (const Error&) {
      throw Error(ErrorKind::kInvalidArgument, "bad --retention value '" + item + "'");
    }
  }
  return out;
}

int cmd_evaluate(const std::string& mode, const std::string& config_path, const std::string& retention,
                 std::size_t trials, const std::string& dataset, const std::string& map_path,
                 const std::string& trajectory) {
  Config cfg = read_config(config_path);
  if (mode == "reloc") {
    if (!retention.empty()) cfg.eval.retentions = parse_retentions(retention);
    if (trials > 0) cfg.eval.trials = trials;
    const Scene scene = generate_scene(cfg.scene);
    const auto reports = evaluate_relocalization(scene, cfg.run, cfg.eval, cfg.settings());
    std::cout << "retention,trials,successes,success_rate,p50_m,p90_m,p95_m,p99_m,rmse_m,density_per_m\n";
    for (const EvalReport& r : reports) {
      std::cout << fixed(r.retention, 2) << "," << r.trial_count << "," << r.success_count << ","
                << fixed(r.success_rate, 4) << "," << fixed(r.p50, 2) << "," << fixed(r.p90, 2) << ","
                << fixed(r.p95, 2) << "," << fixed(r.p99, 2) << "," << fixed(r.rmse, 4) << ","
                << fixed(r.cluster_density, 4) << "\n";
    }
    return 0;
  }

  // loc: score a trajectory file, or run the pipeline and odometry alone.
  if (dataset.empty()) throw Error(ErrorKind::kInvalidArgument, "--mode loc needs --dataset");
  const fs::path dir(dataset);
  const std::vector<StampedPose> truth = to_stamped(load_poses(dir / "poses.txt"));
  std::cout << "trajectory,frames,rmse_m\n";
  if (!trajectory.empty()) {
    const auto est = to_stamped(load_poses(trajectory));
    std::cout << "file," << est.size() << "," << fixed(evaluate_localization(truth, est)) << "\n";
    return 0;
  }
  if (map_path.empty()) throw Error(ErrorKind::kInvalidArgument, "--mode loc needs --map or --trajectory");
  const Dataset data = load_dataset(dir, cfg.labels);
  const ClusterMap global = load_map(map_path);
  const PipelineInput input = pipeline_input(data);
  const PipelineResult result = run_pipeline(input, global, cfg.settings());
  std::cout << "pipeline," << result.trajectory.size() << ","
            << fixed(evaluate_localization(truth, result.trajectory)) << "\n";
  Config odom_only = cfg;
  odom_only.pipeline.relocalization_enabled = false;
  const PipelineResult dead = run_pipeline(input, global, odom_only.settings());
  std::cout << "odometry," << dead.trajectory.size() << "," << fixed(evaluate_localization(truth, dead.trajectory))
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pole and trunk landmark maps, relocalization and drift-corrected localization"};
  app.require_subcommand(1);

  std::string dataset, config, out, map, mode, retention, trajectory;
  std::size_t frame = 0, trials = 0;
  bool no_points = false, no_reloc = false;

  auto* build = app.add_subcommand("build-map", "Extract and register every frame of a dataset into a map");
  build->add_option("--dataset", dataset, "Dataset directory")->required();
  build->add_option("--config", config, "key=value configuration file");
  build->add_option("--out", out, "Map file to write")->required();
  build->add_flag("--no-points", no_points, "Skip the binary point sidecar");

  auto* reloc = app.add_subcommand("relocalize", "Relocalize one dataset frame against a map (JSON record)");
  reloc->add_option("--map", map, "Map file")->required();
  reloc->add_option("--dataset", dataset, "Dataset directory")->required();
  reloc->add_option("--frame", frame, "Frame index")->required();
  reloc->add_option("--config", config, "key=value configuration file");

  auto* loc = app.add_subcommand("localize", "Drift-corrected localization over a dataset (TUM output)");
  loc->add_option("--map", map, "Map file")->required();
  loc->add_option("--dataset", dataset, "Dataset directory")->required();
  loc->add_option("--out", out, "Trajectory file to write")->required();
  loc->add_option("--config", config, "key=value configuration file");
  loc->add_flag("--no-reloc", no_reloc, "Odometry only");

  auto* sim = app.add_subcommand("simulate", "Write a synthetic dataset");
  sim->add_option("--scene", config, "key=value configuration file (scene.*, run.*, drift.*)");
  sim->add_option("--out", out, "Output dataset directory")->required();

  auto* eval = app.add_subcommand("evaluate", "Relocalization or localization report as CSV");
  eval->add_option("--mode", mode, "reloc or loc")->required()->check(CLI::IsMember({"reloc", "loc"}));
  eval->add_option("--config", config, "key=value configuration file");
  eval->add_option("--retention", retention, "Comma-separated retention fractions (reloc)");
  eval->add_option("--trials", trials, "Trials per retention (reloc)");
  eval->add_option("--dataset", dataset, "Dataset directory (loc)");
  eval->add_option("--map", map, "Map file (loc)");
  eval->add_option("--trajectory", trajectory, "TUM trajectory to score (loc)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*build) return cmd_build_map(dataset, config, out, no_points);
    if (*reloc) return cmd_relocalize(map, dataset, frame, config);
    if (*loc) return cmd_localize(map, dataset, out, config, no_reloc);
    if (*sim) return cmd_simulate(config, out);
    if (*eval) return cmd_evaluate(mode, config, retention, trials, dataset, map, trajectory);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
