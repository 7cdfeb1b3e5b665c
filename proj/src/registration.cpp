#include "polereloc/registration.hpp"

namespace polereloc {

void RegistrationParams::validate() const {
  if (!(merge_radius > 0.0)) throw Error(ErrorKind::kConfig, "merge_radius must be positive");
}

std::vector<Cluster> transform_clusters(const std::vector<Cluster>& clusters, const PoseSE3& pose) {
  std::vector<Cluster> out = clusters;
  for (Cluster& c : out) {
    for (LabeledPoint& p : c.points) {
      const Eigen::Vector3d q = pose * p.position();
      p.x = q.x();
      p.y = q.y();
      p.z = q.z();
    }
    c.centroid3d = pose * c.centroid3d;
    c.centroid2d = c.centroid3d.head<2>();
  }
  return out;
}

RegistrationStats register_frame(ClusterMap& map, const std::vector<Cluster>& frame_clusters, const PoseSE3& pose,
                                 const RegistrationParams& params) {
  params.validate();
  if (!pose.is_valid(1e-6)) throw Error(ErrorKind::kInvalidArgument, "invalid pose");

  RegistrationStats stats;
  const std::vector<Cluster> posed = transform_clusters(frame_clusters, pose);
  if (map.empty()) {
    for (const Cluster& c : posed) map.insert(c);
    stats.inserted = posed.size();
    return stats;
  }

  // Clusters of this frame never absorb each other: only ids issued before
  // the frame are merge candidates.
  const ClusterId frame_start = map.next_id();
  auto existed = [frame_start](const Cluster& c) { return c.id < frame_start; };
  for (const Cluster& c : posed) {
    const auto hit = map.nearest_if(c.centroid2d, existed);
    const bool close = hit && hit->distance <= params.merge_radius;
    const bool labels_ok = close && (!params.strict_labels || map.at(hit->id).label == c.label);
    if (close && labels_ok) {
      map.merge(hit->id, c);
      ++stats.merged;
    } else {
      map.insert(c);
      ++stats.inserted;
    }
  }
  return stats;
}

ClusterMap build_local_map(const std::vector<Cluster>& frame_clusters, const PoseSE3& pose) {
  ClusterMap map;
  for (const Cluster& c : transform_clusters(frame_clusters, pose)) map.insert(c);
  map.rebuild_index();
  return map;
}

}  // namespace polereloc
