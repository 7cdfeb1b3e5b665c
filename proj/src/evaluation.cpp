#include "polereloc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "polereloc/extraction.hpp"
#include "polereloc/registration.hpp"

namespace polereloc {

bool relocalization_success(const Eigen::Vector3d& estimate, const Eigen::Vector3d& truth, double threshold) {
  return (estimate - truth).norm() < threshold;
}

double cluster_density(std::size_t clusters, double trajectory_length) {
  if (!(trajectory_length > 0.0)) throw Error(ErrorKind::kInvalidArgument, "trajectory length must be positive");
  return static_cast<double>(clusters) / trajectory_length;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (!(q > 0.0 && q <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "quantile outside (0, 1]");
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size()) - 1e-12));
  return sorted[std::max<std::size_t>(rank, 1) - 1];
}

void RelocEvalSpec::validate() const {
  if (trials == 0) throw Error(ErrorKind::kConfig, "trials must be positive");
  if (!(attempt_spacing > 0.0)) throw Error(ErrorKind::kConfig, "attempt_spacing must be positive");
  if (!(max_distance >= 0.0)) throw Error(ErrorKind::kConfig, "max_distance must be non-negative");
  if (!(success_threshold > 0.0)) throw Error(ErrorKind::kConfig, "success_threshold must be positive");
  for (double r : retentions) {
    if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorKind::kConfig, "retention outside (0, 1]");
  }
}

ClusterMap retain_clusters(const ClusterMap& map, double retention, std::uint64_t seed) {
  if (!(retention >= 0.0 && retention <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "retention outside [0, 1]");
  std::vector<ClusterId> ids = map.ids();
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto keep = static_cast<std::size_t>(std::llround(retention * static_cast<double>(ids.size())));
  ids.resize(keep);
  std::sort(ids.begin(), ids.end());
  ClusterMap out;
  for (ClusterId id : ids) out.insert_with_id(map.at(id));
  out.set_next_id(map.next_id());
  return out;
}

namespace {

struct TrialResult {
  bool success = false;
  double distance = std::numeric_limits<double>::infinity();
  double error = 0.0;
};

TrialResult run_trial(const Scene& scene, const RunSpec& run, const LoopPath& path, const ClusterMap& global,
                      const MapSignature& signature, const RelocEvalSpec& eval, const PipelineSettings& settings,
                      std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(eval.seed), static_cast<std::uint32_t>(eval.seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  std::mt19937_64 rng(seq);
  const double start = std::uniform_real_distribution<double>(0.0, path.length())(rng);

  TrialResult result;
  for (std::size_t attempt = 0;; ++attempt) {
    const double driven = static_cast<double>(attempt) * eval.attempt_spacing;
    if (driven > eval.max_distance + 1e-9) break;
    const PoseSE3 truth = path.pose_at(start + driven);
    const Frame frame = observe(scene, run, truth, driven / run.speed, (trial << 20) + attempt + 1);
    const ClusterMap local = build_local_map(extract_clusters(frame, settings.extraction), PoseSE3::Identity());
    const RelocOutcome outcome = relocalize(local, global, signature, settings.association, settings.reloc);
    if (!outcome.ok()) continue;
    const Eigen::Vector3d estimate = outcome.result->pose.translation();
    if (relocalization_success(estimate, truth.translation(), eval.success_threshold)) {
      result.success = true;
      result.distance = driven;
      result.error = (estimate - truth.translation()).norm();
      break;
    }
  }
  return result;
}

}  // namespace

std::vector<EvalReport> evaluate_relocalization(const Scene& scene, const RunSpec& run, const RelocEvalSpec& eval,
                                                const PipelineSettings& settings) {
  eval.validate();
  settings.extraction.validate();
  settings.association.validate();
  settings.reloc.validate();
  const LoopPath path = make_path(scene, run);

  std::vector<EvalReport> reports;
  for (double retention : eval.retentions) {
    const ClusterMap global = retain_clusters(scene.map, retention, eval.seed);
    const MapSignature signature(global, settings.association.search_radius);

    std::vector<TrialResult> trials(eval.trials);
    const unsigned workers = std::max(1u, std::min<unsigned>(eval.threads, static_cast<unsigned>(eval.trials)));
    auto work = [&](unsigned offset) {
      for (std::size_t i = offset; i < trials.size(); i += workers) {
        trials[i] = run_trial(scene, run, path, global, signature, eval, settings, i);
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }

    EvalReport report;
    report.retention = retention;
    report.trial_count = trials.size();
    std::vector<double> distances;
    double sq = 0.0;
    for (const TrialResult& t : trials) {
      distances.push_back(t.distance);
      if (t.success) {
        ++report.success_count;
        sq += t.error * t.error;
      }
    }
    std::sort(distances.begin(), distances.end());
    report.success_rate = static_cast<double>(report.success_count) / static_cast<double>(report.trial_count);
    report.p50 = quantile_sorted(distances, 0.50);
    report.p90 = quantile_sorted(distances, 0.90);
    report.p95 = quantile_sorted(distances, 0.95);
    report.p99 = quantile_sorted(distances, 0.99);
    report.rmse = report.success_count > 0 ? std::sqrt(sq / static_cast<double>(report.success_count))
                                           : std::numeric_limits<double>::quiet_NaN();
    report.cluster_density = cluster_density(global.size(), path.length());
    reports.push_back(report);
  }
  return reports;
}

double evaluate_localization(const std::vector<StampedPose>& truth, const std::vector<StampedPose>& estimate) {
  if (truth.size() != estimate.size()) {
    throw Error(ErrorKind::kData, "trajectory lengths differ: " + std::to_string(truth.size()) + " vs " +
                                      std::to_string(estimate.size()));
  }
  if (truth.empty()) throw Error(ErrorKind::kData, "empty trajectory");
  double sq = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (std::abs(truth[i].timestamp - estimate[i].timestamp) > 1e-6) {
      throw Error(ErrorKind::kData, "timestamps differ at pose " + std::to_string(i));
    }
    sq += (truth[i].pose.translation() - estimate[i].pose.translation()).squaredNorm();
  }
  return std::sqrt(sq / static_cast<double>(truth.size()));
}

}  // namespace polereloc
