#pragma once

#include <span>
#include <vector>

#include "polereloc/cluster_map.hpp"
#include "polereloc/types.hpp"

namespace polereloc {

struct ExtractionParams {
  double cluster_distance = 0.5;  // meters
  std::size_t min_points = 10;

  void validate() const;
};

/// Points labeled Pole or Trunk, in input order.
std::vector<LabeledPoint> filter_landmark_points(const Frame& frame);

/// Connected components of the graph linking points closer than
/// `cluster_distance` (inclusive). Components smaller than `min_points` are
/// dropped. Each group lists point indices ascending; groups are ordered by
/// their first index.
std::vector<std::vector<std::size_t>> euclidean_cluster(std::span<const LabeledPoint> points,
                                                        const ExtractionParams& params);

/// Majority label among Pole/Trunk points; a tie goes to Pole.
/// Throws when no point carries a landmark label.
SemanticLabel vote_label(std::span<const LabeledPoint> points);

/// Filter, cluster each landmark class separately, vote, and compute
/// centroids. Output is sorted by (centroid2d.x, centroid2d.y) and ids are
/// assigned 0..n-1 in that order.
std::vector<Cluster> extract_clusters(const Frame& frame, const ExtractionParams& params);

}  // namespace polereloc
