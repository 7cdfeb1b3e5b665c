#include "polereloc/relocalization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "polereloc/kd_tree.hpp"

namespace polereloc {

void RelocParams::validate() const {
  if (!(epsilon > 0.0) || !(ransac_threshold > 0.0) || !(icp_convergence > 0.0)) {
    throw Error(ErrorKind::kConfig, "relocalization tolerances must be positive");
  }
  if (ransac_iterations < 1 || min_pairs < 1 || icp_max_iterations < 1) {
    throw Error(ErrorKind::kConfig, "relocalization counts must be at least 1");
  }
}

std::string to_string(RelocFailure failure) {
  switch (failure) {
    case RelocFailure::kNoMatches:
      return "no-matches";
    case RelocFailure::kConsistencyCollapse:
      return "consistency-collapse";
    case RelocFailure::kRansacFailure:
      return "ransac-failure";
    case RelocFailure::kDegenerateFit:
      return "degenerate-fit";
  }
  return "unknown";
}

namespace {

bool canonical_less(const MatchPair& a, const MatchPair& b) {
  return a.local_id != b.local_id ? a.local_id < b.local_id : a.global_id < b.global_id;
}

struct CentroidPairs {
  std::vector<Eigen::Vector3d> local;
  std::vector<Eigen::Vector3d> global;
};

CentroidPairs centroid_pairs(const std::vector<MatchPair>& pairs, const ClusterMap& local_map,
                             const ClusterMap& global_map) {
  CentroidPairs out;
  for (const MatchPair& p : pairs) {
    out.local.push_back(local_map.at(p.local_id).centroid3d);
    out.global.push_back(global_map.at(p.global_id).centroid3d);
  }
  return out;
}

}  // namespace

std::vector<MatchPair> geometric_consistency_filter(const std::vector<MatchPair>& pairs, const ClusterMap& local_map,
                                                    const ClusterMap& global_map, double epsilon) {
  if (pairs.size() < 2) return pairs;
  std::vector<MatchPair> sorted = pairs;
  std::sort(sorted.begin(), sorted.end(), canonical_less);
  const std::size_t n = sorted.size();
  const CentroidPairs c = centroid_pairs(sorted, local_map, global_map);

  std::vector<std::vector<char>> adjacent(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d_l = (c.local[i] - c.local[j]).norm();
      const double d_g = (c.global[i] - c.global[j]).norm();
      adjacent[i][j] = adjacent[j][i] = std::abs(d_l - d_g) <= epsilon;
    }
  }

  std::vector<std::size_t> best;
  for (std::size_t seed = 0; seed < n; ++seed) {
    std::vector<std::size_t> clique{seed};
    std::vector<std::size_t> candidates;
    for (std::size_t v = 0; v < n; ++v) {
      if (adjacent[seed][v]) candidates.push_back(v);
    }
    while (!candidates.empty()) {
      // The candidate adjacent to most other candidates keeps the most room to grow.
      std::size_t pick = candidates.front();
      std::size_t pick_degree = 0;
      bool first = true;
      for (std::size_t v : candidates) {
        std::size_t degree = 0;
        for (std::size_t w : candidates) degree += adjacent[v][w];
        if (first || degree > pick_degree) {
          pick = v;
          pick_degree = degree;
          first = false;
        }
      }
      clique.push_back(pick);
      std::erase_if(candidates, [&](std::size_t v) { return v == pick || !adjacent[pick][v]; });
    }
    if (clique.size() > best.size()) best = std::move(clique);
  }

  std::sort(best.begin(), best.end());
  std::vector<MatchPair> out;
  for (std::size_t i : best) out.push_back(sorted[i]);
  return out;
}

PoseSE3 estimate_rigid_transform(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst) {
  if (src.size() != dst.size()) throw Error(ErrorKind::kInvalidArgument, "correspondence lists differ in length");
  if (src.size() < 3) throw Error(ErrorKind::kDegenerate, "degenerate correspondences");

  const double n = static_cast<double>(src.size());
  Eigen::Vector3d mean_src = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean_dst = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mean_src += src[i];
    mean_dst += dst[i];
  }
  mean_src /= n;
  mean_dst /= n;

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d s = src[i] - mean_src;
    cross += s * (dst[i] - mean_dst).transpose();
    scatter += s * s.transpose();
  }

  // Rotation is only determined when the sources span at least a plane.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d lambda = eig.eigenvalues();  // ascending
  if (!(lambda(2) > 0.0) || lambda(1) <= 1e-12 * lambda(2)) {
    throw Error(ErrorKind::kDegenerate, "degenerate correspondences");
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = v * d * u.transpose();
  return {r, mean_dst - r * mean_src};
}

std::vector<MatchPair> ransac_filter(const std::vector<MatchPair>& pairs, const ClusterMap& local_map,
                                     const ClusterMap& global_map, const RelocParams& params) {
  const std::size_t n = pairs.size();
  if (n < 3) throw Error(ErrorKind::kDegenerate, "insufficient pairs");
  const CentroidPairs c = centroid_pairs(pairs, local_map, global_map);

  std::vector<std::size_t> best_inliers;
  std::vector<std::size_t> inliers;
  auto evaluate = [&](std::size_t a, std::size_t b, std::size_t d) {
    const std::array<Eigen::Vector3d, 3> src{c.local[a], c.local[b], c.local[d]};
    const std::array<Eigen::Vector3d, 3> dst{c.global[a], c.global[b], c.global[d]};
    PoseSE3 t;
    try {
      t = estimate_rigid_transform(src, dst);
    } catch (const Error&) {
      return;
    }
    inliers.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if ((c.global[i] - t * c.local[i]).norm() < params.ransac_threshold) inliers.push_back(i);
    }
    if (inliers.size() > best_inliers.size()) best_inliers = inliers;
  };

  const double combos = static_cast<double>(n) * static_cast<double>(n - 1) * static_cast<double>(n - 2) / 6.0;
  if (combos <= static_cast<double>(params.ransac_iterations)) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        for (std::size_t d = b + 1; d < n; ++d) evaluate(a, b, d);
      }
    }
  } else {
    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t it = 0; it < params.ransac_iterations; ++it) {
      const std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      while (b == a) b = pick(rng);
      std::size_t d = pick(rng);
      while (d == a || d == b) d = pick(rng);
      evaluate(a, b, d);
    }
  }

  if (best_inliers.size() < 3) throw Error(ErrorKind::kDegenerate, "insufficient pairs");
  std::vector<MatchPair> out;
  for (std::size_t i : best_inliers) out.push_back(pairs[i]);
  return out;
}

PoseSE3 coarse_align(const std::vector<MatchPair>& pairs, const ClusterMap& local_map, const ClusterMap& global_map) {
  const CentroidPairs c = centroid_pairs(pairs, local_map, global_map);
  return estimate_rigid_transform(c.local, c.global);
}

namespace {

double centroid_rms(const std::vector<MatchPair>& pairs, const ClusterMap& local_map, const ClusterMap& global_map,
                    const PoseSE3& pose) {
  if (pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const MatchPair& p : pairs) {
    sum += (global_map.at(p.global_id).centroid3d - pose * local_map.at(p.local_id).centroid3d).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

}  // namespace

FineAlignResult fine_align(const std::vector<MatchPair>& pairs, const ClusterMap& local_map,
                           const ClusterMap& global_map, const PoseSE3& init, const RelocParams& params) {
  FineAlignResult result;
  result.pose = init;

  std::vector<Eigen::Vector3d> src;
  std::vector<KdTree<3>::Point> dst;
  std::set<ClusterId> local_used;
  std::set<ClusterId> global_used;
  for (const MatchPair& p : pairs) {
    if (local_used.insert(p.local_id).second) {
      for (const auto& pt : local_map.at(p.local_id).points) src.push_back(pt.position());
    }
    if (global_used.insert(p.global_id).second) {
      for (const auto& pt : global_map.at(p.global_id).points) dst.push_back(pt.position());
    }
  }
  if (src.empty() || dst.empty()) {
    result.fell_back = true;
    result.residual_rms = centroid_rms(pairs, local_map, global_map, init);
    result.residual_history.push_back(result.residual_rms);
    return result;
  }

  KdTree<3> tree;
  tree.build(dst);
  std::vector<Eigen::Vector3d> matched(src.size());
  // RMS nearest-neighbor distance under `pose`, filling `matched`.
  auto correspond = [&](const PoseSE3& pose) {
    double sum = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      const auto hit = tree.nearest(pose * src[i]);
      matched[i] = tree.point(hit->index);
      sum += hit->squared_distance;
    }
    return std::sqrt(sum / static_cast<double>(src.size()));
  };

  double rms = correspond(init);
  result.residual_history.push_back(rms);
  for (std::size_t it = 0; it < params.icp_max_iterations; ++it) {
    PoseSE3 next;
    try {
      next = estimate_rigid_transform(src, matched);
    } catch (const Error&) {
      break;
    }
    const std::vector<Eigen::Vector3d> previous_matches = matched;
    const double next_rms = correspond(next);
    if (next_rms > rms) {
      matched = previous_matches;
      break;
    }
    const double gain = rms - next_rms;
    result.pose = next;
    rms = next_rms;
    result.residual_history.push_back(rms);
    ++result.iterations;
    if (gain < params.icp_convergence) break;
  }
  result.residual_rms = rms;
  return result;
}

RelocOutcome relocalize(const ClusterMap& local_map, const ClusterMap& global_map, const MapSignature& global_signature,
                        const AssociationParams& assoc_params, const RelocParams& reloc_params) {
  assoc_params.validate();
  reloc_params.validate();
  RelocOutcome outcome;
  auto fail = [&](RelocFailure reason) {
    outcome.failure = reason;
    return outcome;
  };

  std::vector<MatchPair> pairs =
      associate_maps(MapSignature(local_map, assoc_params.search_radius), global_signature, assoc_params);
  outcome.associated_pairs = pairs.size();
  if (pairs.size() < reloc_params.min_pairs) return fail(RelocFailure::kNoMatches);

  auto consistency = [&] {
    pairs = geometric_consistency_filter(pairs, local_map, global_map, reloc_params.epsilon);
    return pairs.size() >= reloc_params.min_pairs;
  };
  auto ransac = [&] {
    try {
      pairs = ransac_filter(pairs, local_map, global_map, reloc_params);
    } catch (const Error&) {
      return false;
    }
    return pairs.size() >= reloc_params.min_pairs;
  };
  if (reloc_params.ransac_first) {
    if (!ransac()) return fail(RelocFailure::kRansacFailure);
    if (!consistency()) return fail(RelocFailure::kConsistencyCollapse);
  } else {
    if (!consistency()) return fail(RelocFailure::kConsistencyCollapse);
    if (!ransac()) return fail(RelocFailure::kRansacFailure);
  }

  PoseSE3 coarse;
  try {
    coarse = coarse_align(pairs, local_map, global_map);
  } catch (const Error&) {
    return fail(RelocFailure::kDegenerateFit);
  }
  const FineAlignResult fine = fine_align(pairs, local_map, global_map, coarse, reloc_params);
  outcome.result = RelocResult{fine.pose, pairs, fine.residual_rms};
  return outcome;
}

RelocOutcome relocalize(const ClusterMap& local_map, const ClusterMap& global_map, const AssociationParams& assoc_params,
                        const RelocParams& reloc_params) {
  assoc_params.validate();
  return relocalize(local_map, global_map, MapSignature(global_map, assoc_params.search_radius), assoc_params,
                    reloc_params);
}

}  // namespace polereloc
