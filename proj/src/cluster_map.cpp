#include "polereloc/cluster_map.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

namespace polereloc {

Centroids compute_centroids(std::span<const LabeledPoint> points) {
  if (points.empty()) throw Error(ErrorKind::kInvalidArgument, "empty cluster");
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (const auto& p : points) sum += p.position();
  const Eigen::Vector3d c = sum / static_cast<double>(points.size());
  return {c, c.head<2>()};
}

Cluster make_cluster(SemanticLabel label, std::vector<LabeledPoint> points) {
  Cluster c;
  c.label = label;
  const Centroids centroids = compute_centroids(points);
  c.centroid3d = centroids.centroid3d;
  c.centroid2d = centroids.centroid2d;
  c.point_count = points.size();
  c.points = std::move(points);
  return c;
}

ClusterMap::ClusterMap(const ClusterMap& other) { *this = other; }

ClusterMap& ClusterMap::operator=(const ClusterMap& other) {
  if (this == &other) return *this;
  std::shared_lock lock(other.index_mutex_);
  clusters_ = other.clusters_;
  next_id_ = other.next_id_;
  tree_ = other.tree_;
  stale_ = other.stale_;
  pending_ = other.pending_;
  return *this;
}

ClusterMap::ClusterMap(ClusterMap&& other) noexcept
    : clusters_(std::move(other.clusters_)),
      next_id_(other.next_id_),
      tree_(std::move(other.tree_)),
      stale_(std::move(other.stale_)),
      pending_(std::move(other.pending_)) {}

ClusterMap& ClusterMap::operator=(ClusterMap&& other) noexcept {
  clusters_ = std::move(other.clusters_);
  next_id_ = other.next_id_;
  tree_ = std::move(other.tree_);
  stale_ = std::move(other.stale_);
  pending_ = std::move(other.pending_);
  return *this;
}

ClusterId ClusterMap::insert(Cluster cluster) {
  cluster.id = next_id_++;
  const ClusterId id = cluster.id;
  clusters_.emplace(id, std::move(cluster));
  pending_.insert(id);
  return id;
}

void ClusterMap::insert_with_id(Cluster cluster) {
  const ClusterId id = cluster.id;
  if (clusters_.count(id) != 0) {
    throw Error(ErrorKind::kData, "duplicate cluster id " + std::to_string(id));
  }
  clusters_.emplace(id, std::move(cluster));
  // An id may be reused after erase; its old tree entry must stay ignored.
  pending_.insert(id);
  next_id_ = std::max(next_id_, id + 1);
}

bool ClusterMap::erase(ClusterId id) {
  if (clusters_.erase(id) == 0) return false;
  stale_.insert(id);
  pending_.erase(id);
  return true;
}

void ClusterMap::mark_moved(ClusterId id) {
  stale_.insert(id);
  pending_.insert(id);
}

void ClusterMap::merge(ClusterId target, const Cluster& incoming) {
  auto it = clusters_.find(target);
  if (it == clusters_.end()) {
    throw Error(ErrorKind::kInvalidArgument, "merge target " + std::to_string(target) + " not in map");
  }
  Cluster& c = it->second;
  const double n_old = static_cast<double>(c.point_count);
  const double n_new = static_cast<double>(incoming.point_count);
  if (n_old + n_new <= 0.0) return;
  c.centroid3d = (c.centroid3d * n_old + incoming.centroid3d * n_new) / (n_old + n_new);
  c.centroid2d = c.centroid3d.head<2>();
  c.point_count += incoming.point_count;
  c.points.insert(c.points.end(), incoming.points.begin(), incoming.points.end());
  for (auto& p : c.points) p.label = c.label;
  mark_moved(target);
}

const Cluster* ClusterMap::find(ClusterId id) const {
  auto it = clusters_.find(id);
  return it == clusters_.end() ? nullptr : &it->second;
}

const Cluster& ClusterMap::at(ClusterId id) const {
  const Cluster* c = find(id);
  if (c == nullptr) throw Error(ErrorKind::kInvalidArgument, "cluster " + std::to_string(id) + " not in map");
  return *c;
}

std::vector<ClusterId> ClusterMap::ids() const {
  std::vector<ClusterId> out;
  out.reserve(clusters_.size());
  for (const auto& [id, c] : clusters_) out.push_back(id);
  return out;
}

void ClusterMap::set_next_id(ClusterId next) {
  if (!clusters_.empty() && next <= clusters_.rbegin()->first) {
    throw Error(ErrorKind::kData, "next id must exceed every stored id");
  }
  next_id_ = next;
}

bool ClusterMap::index_needs_rebuild() const {
  const std::size_t backlog = pending_.size() + stale_.size();
  return backlog > std::max<std::size_t>(16, clusters_.size() / 8);
}

void ClusterMap::rebuild_index_locked() const {
  std::vector<KdTree<2>::Point> pts;
  std::vector<std::uint64_t> keys;
  pts.reserve(clusters_.size());
  keys.reserve(clusters_.size());
  for (const auto& [id, c] : clusters_) {
    pts.push_back(c.centroid2d);
    keys.push_back(id);
  }
  tree_.build(std::move(pts), std::move(keys));
  stale_.clear();
  pending_.clear();
}

void ClusterMap::rebuild_index() const {
  std::unique_lock lock(index_mutex_);
  rebuild_index_locked();
}

namespace {

// Takes a shared lock on an index that needs no rebuild, rebuilding first
// under an exclusive lock when it does.
template <typename Map>
std::shared_lock<std::shared_mutex> lock_fresh_index(const Map& map, std::shared_mutex& m,
                                                     bool (Map::*needs)() const, void (Map::*rebuild)() const) {
  {
    std::shared_lock lock(m);
    if (!(map.*needs)()) return lock;
  }
  {
    std::unique_lock lock(m);
    if ((map.*needs)()) (map.*rebuild)();
  }
  return std::shared_lock(m);
}

}  // namespace

std::vector<ClusterId> ClusterMap::radius_search(const Eigen::Vector2d& query, double radius) const {
  if (!(radius > 0.0)) throw Error(ErrorKind::kInvalidArgument, "radius must be positive");
  auto lock = lock_fresh_index(*this, index_mutex_, &ClusterMap::index_needs_rebuild,
                               &ClusterMap::rebuild_index_locked);
  std::vector<ClusterId> out;
  std::vector<std::size_t> hits;
  tree_.radius_search(query, radius, hits);
  for (std::size_t h : hits) {
    const ClusterId id = tree_.key(h);
    if (stale_.count(id) == 0) out.push_back(id);
  }
  const double r2 = radius * radius;
  for (ClusterId id : pending_) {
    if ((clusters_.at(id).centroid2d - query).squaredNorm() <= r2) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ClusterId> ClusterMap::neighbors(ClusterId id, double radius) const {
  std::vector<ClusterId> out = radius_search(at(id).centroid2d, radius);
  out.erase(std::remove(out.begin(), out.end(), id), out.end());
  return out;
}

std::optional<NearestHit> ClusterMap::nearest(const Eigen::Vector2d& query) const {
  return nearest_if(query, [](const Cluster&) { return true; });
}

std::optional<NearestHit> ClusterMap::nearest_if(const Eigen::Vector2d& query,
                                                 const std::function<bool(const Cluster&)>& accept) const {
  auto lock = lock_fresh_index(*this, index_mutex_, &ClusterMap::index_needs_rebuild,
                               &ClusterMap::rebuild_index_locked);
  std::optional<NearestHit> best;
  double best_d2 = 0.0;
  auto consider = [&](ClusterId id, double d2) {
    if (!best || d2 < best_d2 || (d2 == best_d2 && id < best->id)) {
      best = NearestHit{id, 0.0};
      best_d2 = d2;
    }
  };
  auto hit = tree_.nearest(query, [&](std::size_t i) {
    const ClusterId id = tree_.key(i);
    return stale_.count(id) == 0 && accept(clusters_.at(id));
  });
  if (hit) consider(tree_.key(hit->index), hit->squared_distance);
  for (ClusterId id : pending_) {
    const Cluster& c = clusters_.at(id);
    if (accept(c)) consider(id, (c.centroid2d - query).squaredNorm());
  }
  if (best) best->distance = std::sqrt(best_d2);
  return best;
}

}  // namespace polereloc
