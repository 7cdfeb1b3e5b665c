#pragma once

#include <vector>

#include "polereloc/cluster_map.hpp"
#include "polereloc/pose.hpp"

namespace polereloc {

struct RegistrationParams {
  double merge_radius = 1.0;  // meters
  // Merge only when the nearest map cluster already has the incoming label;
  // otherwise the incoming cluster is inserted as a new one.
  bool strict_labels = false;

  void validate() const;
};

struct RegistrationStats {
  std::size_t merged = 0;
  std::size_t inserted = 0;
};

/// Maps every member point and both centroids through `pose`.
std::vector<Cluster> transform_clusters(const std::vector<Cluster>& clusters, const PoseSE3& pose);

/// Registers one frame's clusters into the global map.
///
/// Each incoming cluster is posed into the map frame and compared against
/// the clusters that existed before this frame. The nearest one within
/// merge_radius absorbs it (keeping its own id and label); otherwise the
/// cluster is inserted with a new id. An empty map is initialized with all
/// clusters of the frame.
RegistrationStats register_frame(ClusterMap& map, const std::vector<Cluster>& frame_clusters, const PoseSE3& pose,
                                 const RegistrationParams& params);

/// Fresh map holding one frame's clusters posed by `pose`.
ClusterMap build_local_map(const std::vector<Cluster>& frame_clusters, const PoseSE3& pose);

}  // namespace polereloc
