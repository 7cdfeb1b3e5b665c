#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "polereloc/localization.hpp"
#include "polereloc/pose.hpp"
#include "polereloc/sim.hpp"

namespace polereloc {

/// ||estimate - truth|| < threshold.
bool relocalization_success(const Eigen::Vector3d& estimate, const Eigen::Vector3d& truth, double threshold);

/// Landmarks per meter of trajectory. Throws for a non-positive length.
double cluster_density(std::size_t clusters, double trajectory_length);

/// Nearest-rank quantile of an ascending sample; q in (0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

struct EvalReport {
  double retention = 1.0;
  std::size_t success_count = 0;
  std::size_t trial_count = 0;
  double success_rate = 0.0;
  // Distance driven until the first successful relocalization. Trials that
  // never succeed count as +inf, so the quantiles cover every trial.
  double p50 = 0.0;
  double p90 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double rmse = 0.0;  // position error of the successful fixes
  double cluster_density = 0.0;
};

struct RelocEvalSpec {
  std::vector<double> retentions{1.0, 0.8, 0.6};
  std::size_t trials = 50;
  double attempt_spacing = 5.0;  // meters driven between attempts
  double max_distance = 200.0;
  double success_threshold = 2.0;  // meters
  std::uint64_t seed = 2024;
  unsigned threads = 1;

  void validate() const;
};

/// Global map keeping round(retention * n) clusters of the scene, chosen by a
/// seeded shuffle. Ids are preserved.
ClusterMap retain_clusters(const ClusterMap& map, double retention, std::uint64_t seed);

/// For every retention: `trials` runs from random positions on the route,
/// each attempting relocalization every attempt_spacing meters until a fix
/// lands within success_threshold of the truth or max_distance is driven.
std::vector<EvalReport> evaluate_relocalization(const Scene& scene, const RunSpec& run, const RelocEvalSpec& eval,
                                                const PipelineSettings& settings);

/// RMS position error over time-aligned trajectories. Throws kData on
/// differing lengths or timestamps.
double evaluate_localization(const std::vector<StampedPose>& truth, const std::vector<StampedPose>& estimate);

}  // namespace polereloc
