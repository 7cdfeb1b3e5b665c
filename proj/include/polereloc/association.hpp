#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "polereloc/cluster_map.hpp"

namespace polereloc {

/// Thresholds of the edge / sub-edge matcher. Defaults are the published
/// settings for urban campus scenes.
struct AssociationParams {
  double search_radius = 50.0;  // SR, meters
  double delta_d = 0.3;         // sub-edge length error, meters
  double delta_theta = 10.0;    // sub-edge angle error, degrees
  double delta_se = 0.2;        // sub-edge distance, meters
  double delta_e = 0.25;        // best candidate edge-pair distance, meters
  std::size_t n_se = 5;         // minimum matched sub-edges per edge pair
  std::size_t n_e = 5;          // minimum matched edges per cluster pair
  std::size_t n_candidates = 5;

  void validate() const;
};

/// Segment from an anchor cluster's 2D centroid to one of its neighbors.
struct Edge {
  ClusterId anchor_id = 0;
  ClusterId neighbor_id = 0;
  double length = 0.0;
  Eigen::Vector2d direction = Eigen::Vector2d::UnitX();  // unit, anchor -> neighbor
  SemanticLabel neighbor_label;
};

/// A sub-edge seen from the edge under matching: its length and the
/// clockwise angle (degrees, [0, 360)) from the matching edge to it.
struct SubEdgeFeature {
  double d = 0.0;
  double theta = 0.0;
};

struct MatchPair {
  ClusterId local_id = 0;
  ClusterId global_id = 0;
  std::size_t matched_edges = 0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

/// Returned by edge_pair_distance when too few sub-edges match.
inline constexpr double kUnmatched = std::numeric_limits<double>::max();

/// Edges from `anchor` to every other cluster within `search_radius`
/// (zero-length edges are skipped), sorted by (length, neighbor id).
std::vector<Edge> neighbor_edges(const ClusterMap& map, ClusterId anchor, double search_radius);

/// Clockwise angle of `direction` measured from +x, degrees in [0, 360).
double clockwise_heading_deg(const Eigen::Vector2d& direction);
/// Clockwise angle from `from` to `to`, degrees in [0, 360).
double clockwise_angle_deg(const Eigen::Vector2d& from, const Eigen::Vector2d& to);
/// Circular difference of two angles in degrees, in [0, 180].
double angle_difference_deg(double a, double b);

SubEdgeFeature sub_edge_feature(const Edge& matching, const Edge& sub);

/// Law-of-cosines distance between the two sub-edge endpoints.
double sub_edge_distance(const SubEdgeFeature& a, const SubEdgeFeature& b);

/// Same neighbor label, and length, angle and endpoint distance under their
/// thresholds.
bool match_sub_edges(const SubEdgeFeature& a, const SubEdgeFeature& b, SemanticLabel label_a, SemanticLabel label_b,
                     const AssociationParams& params);

/// Indices into `global_edges` of the (up to) n edges whose length is
/// closest to target.length, ordered by length gap, ties by index.
std::vector<std::size_t> candidate_edges(const Edge& target, std::span<const Edge> global_edges, std::size_t n);

/// Result of pairing the sub-edge sets of one candidate edge pair.
struct EdgePairScore {
  double distance = kUnmatched;
  std::size_t matched_sub_edges = 0;
};

/// Distance between local edge `local_index` and global edge `global_index`.
/// Sub-edges are paired one-to-one, greedily by increasing sub-edge
/// distance; with k_se pairs and k_l local edges the score is
/// ln((k_l - 1) / k_se) * mean pair distance when k_se >= n_se, otherwise
/// kUnmatched.
EdgePairScore edge_pair_score(std::size_t local_index, std::size_t global_index, std::span<const Edge> local_edges,
                              std::span<const Edge> global_edges, const AssociationParams& params);

inline double edge_pair_distance(std::size_t local_index, std::size_t global_index, std::span<const Edge> local_edges,
                                 std::span<const Edge> global_edges, const AssociationParams& params) {
  return edge_pair_score(local_index, global_index, local_edges, global_edges, params).distance;
}

struct ClusterMatch {
  bool matched = false;
  std::size_t matched_edges = 0;
};

/// Decides whether local cluster `local_id` and global cluster `global_id`
/// are the same object: equal labels and at least n_e local edges whose
/// best candidate edge pair scores below delta_e.
ClusterMatch match_clusters(ClusterId local_id, ClusterId global_id, const ClusterMap& local_map,
                            const ClusterMap& global_map, const AssociationParams& params);

/// Per-cluster edge tables of a map, reusable across association calls.
class MapSignature {
 public:
  struct ClusterSignature {
    ClusterId id = 0;
    SemanticLabel label;
    std::vector<Edge> edges;
    std::vector<double> lengths;
    std::vector<double> headings;  // clockwise from +x, per edge
  };

  MapSignature() = default;
  MapSignature(const ClusterMap& map, double search_radius);

  double search_radius() const { return search_radius_; }
  const std::vector<ClusterSignature>& clusters() const { return clusters_; }

 private:
  double search_radius_ = 0.0;
  std::vector<ClusterSignature> clusters_;  // ascending id
};

/// Match test on precomputed signatures. With `stop_early` the edge scan is
/// abandoned once n_e can no longer be reached, so for a failed pair
/// matched_edges is only a lower bound.
ClusterMatch match_signatures(const MapSignature::ClusterSignature& local, const MapSignature::ClusterSignature& global,
                              const AssociationParams& params, bool stop_early);

/// For every local cluster, the matching global cluster with the most
/// matched edges (ties to the lowest global id). Sorted by local id.
/// Results do not depend on `threads`.
std::vector<MatchPair> associate_maps(const ClusterMap& local_map, const ClusterMap& global_map,
                                      const AssociationParams& params, unsigned threads = 1);
std::vector<MatchPair> associate_maps(const MapSignature& local, const MapSignature& global,
                                      const AssociationParams& params, unsigned threads = 1);

}  // namespace polereloc
