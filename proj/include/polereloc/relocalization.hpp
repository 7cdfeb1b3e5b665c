#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "polereloc/association.hpp"
#include "polereloc/cluster_map.hpp"
#include "polereloc/pose.hpp"

namespace polereloc {

struct RelocParams {
  double epsilon = 0.5;           // pairwise distance tolerance of the consistency graph, meters
  double ransac_threshold = 0.5;  // centroid residual for a RANSAC inlier, meters
  std::size_t ransac_iterations = 200;
  std::size_t min_pairs = 4;
  std::size_t icp_max_iterations = 30;
  double icp_convergence = 1e-4;  // meters of RMS change
  std::uint64_t seed = 42;
  bool ransac_first = false;  // run RANSAC before the consistency filter

  void validate() const;
};

/// Verified transform between a local and a global map. `pose` maps local
/// coordinates into the global frame.
struct RelocResult {
  PoseSE3 pose;
  std::vector<MatchPair> inlier_pairs;
  double residual_rms = 0.0;
};

enum class RelocFailure {
  kNoMatches,
  kConsistencyCollapse,
  kRansacFailure,
  kDegenerateFit,
};

std::string to_string(RelocFailure failure);

struct RelocOutcome {
  std::optional<RelocResult> result;
  RelocFailure failure = RelocFailure::kNoMatches;  // valid when !result
  std::size_t associated_pairs = 0;

  bool ok() const { return result.has_value(); }
};

/// Largest pairwise-consistent subset of `pairs`: two pairs agree when the
/// distance between their local centroids and the distance between their
/// global centroids differ by at most epsilon. The clique is grown greedily
/// from every seed vertex and the largest one wins. Output is sorted by
/// (local_id, global_id) and does not depend on input order.
std::vector<MatchPair> geometric_consistency_filter(const std::vector<MatchPair>& pairs, const ClusterMap& local_map,
                                                    const ClusterMap& global_map, double epsilon);

/// Least-squares rigid transform T minimizing Σ ||dst_i − T src_i||² (no
/// scale). Throws "degenerate correspondences" with fewer than 3 points or
/// collinear sources.
PoseSE3 estimate_rigid_transform(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst);

/// Hypothesize-and-verify over centroid correspondences. Enumerates every
/// 3-subset when there are no more of them than ransac_iterations,
/// otherwise samples with the seeded generator. Returns the largest inlier
/// set, sorted like the input.
std::vector<MatchPair> ransac_filter(const std::vector<MatchPair>& pairs, const ClusterMap& local_map,
                                     const ClusterMap& global_map, const RelocParams& params);

/// Closed-form alignment of the paired 3D centroids, local -> global.
PoseSE3 coarse_align(const std::vector<MatchPair>& pairs, const ClusterMap& local_map, const ClusterMap& global_map);

struct FineAlignResult {
  PoseSE3 pose;
  double residual_rms = 0.0;
  std::size_t iterations = 0;
  bool fell_back = false;  // no member points; pose is the initial guess
  std::vector<double> residual_history;  // RMS after init and each accepted iteration
};

/// Point-to-point ICP from the stacked member points of the matched local
/// clusters onto those of the matched global clusters, starting at `init`.
/// An iteration is kept only if it does not raise the RMS residual.
FineAlignResult fine_align(const std::vector<MatchPair>& pairs, const ClusterMap& local_map,
                           const ClusterMap& global_map, const PoseSE3& init, const RelocParams& params);

/// Association, consistency filtering, RANSAC, coarse and fine alignment.
RelocOutcome relocalize(const ClusterMap& local_map, const ClusterMap& global_map, const AssociationParams& assoc_params,
                        const RelocParams& reloc_params);
/// Same, reusing a precomputed signature of the global map.
RelocOutcome relocalize(const ClusterMap& local_map, const ClusterMap& global_map, const MapSignature& global_signature,
                        const AssociationParams& assoc_params, const RelocParams& reloc_params);

}  // namespace polereloc
