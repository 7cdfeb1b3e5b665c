#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "polereloc/kd_tree.hpp"
#include "polereloc/types.hpp"

namespace polereloc {

struct Centroids {
  Eigen::Vector3d centroid3d;
  Eigen::Vector2d centroid2d;
};

/// Mean position of the points and its XY projection. Throws on empty input.
Centroids compute_centroids(std::span<const LabeledPoint> points);

/// One pole-like object.
struct Cluster {
  ClusterId id = 0;
  SemanticLabel label;
  std::vector<LabeledPoint> points;
  Eigen::Vector3d centroid3d = Eigen::Vector3d::Zero();
  Eigen::Vector2d centroid2d = Eigen::Vector2d::Zero();
  // Equals points.size() unless the member points were not loaded.
  std::size_t point_count = 0;
};

/// Builds a cluster with centroids computed from `points`.
Cluster make_cluster(SemanticLabel label, std::vector<LabeledPoint> points);

struct NearestHit {
  ClusterId id;
  double distance;
};

/// Id-addressable set of clusters with a planar index over the 2D centroids.
///
/// Ids come from a per-map monotone counter. The kd-tree is rebuilt lazily:
/// clusters inserted or moved since the last build are answered by a linear
/// scan until the backlog is large enough to justify a rebuild, so queries
/// always see the current centroids.
///
/// Const queries may run concurrently; mutation requires exclusive access.
class ClusterMap {
 public:
  ClusterMap() = default;
  ClusterMap(const ClusterMap& other);
  ClusterMap& operator=(const ClusterMap& other);
  ClusterMap(ClusterMap&& other) noexcept;
  ClusterMap& operator=(ClusterMap&& other) noexcept;

  /// Inserts with a freshly assigned id, which is returned.
  ClusterId insert(Cluster cluster);
  /// Inserts keeping cluster.id; used when loading persisted maps.
  void insert_with_id(Cluster cluster);
  bool erase(ClusterId id);
  /// Appends `incoming`'s points to cluster `target` and moves its centroid to
  /// the point-count-weighted mean. Id and label of the target are kept.
  void merge(ClusterId target, const Cluster& incoming);

  const Cluster* find(ClusterId id) const;
  const Cluster& at(ClusterId id) const;
  bool contains(ClusterId id) const { return clusters_.count(id) != 0; }
  std::size_t size() const { return clusters_.size(); }
  bool empty() const { return clusters_.empty(); }
  std::vector<ClusterId> ids() const;

  ClusterId next_id() const { return next_id_; }
  void set_next_id(ClusterId next);

  auto begin() const { return clusters_.begin(); }
  auto end() const { return clusters_.end(); }

  /// Ids (ascending) of clusters whose 2D centroid lies within `radius`.
  std::vector<ClusterId> radius_search(const Eigen::Vector2d& query, double radius) const;
  /// Like radius_search around cluster `id`, excluding `id` itself.
  std::vector<ClusterId> neighbors(ClusterId id, double radius) const;
  /// Closest cluster by 2D centroid distance; ties go to the lowest id.
  std::optional<NearestHit> nearest(const Eigen::Vector2d& query) const;
  std::optional<NearestHit> nearest_if(const Eigen::Vector2d& query,
                                       const std::function<bool(const Cluster&)>& accept) const;

  /// Forces the spatial index up to date.
  void rebuild_index() const;

 private:
  bool index_needs_rebuild() const;
  void rebuild_index_locked() const;
  void mark_moved(ClusterId id);

  std::map<ClusterId, Cluster> clusters_;
  ClusterId next_id_ = 0;

  mutable std::shared_mutex index_mutex_;
  mutable KdTree<2> tree_;
  // Tree entries to ignore (erased or moved clusters).
  mutable std::unordered_set<ClusterId> stale_;
  // Live clusters missing from the tree or present with an outdated centroid.
  mutable std::set<ClusterId> pending_;
};

}  // namespace polereloc
