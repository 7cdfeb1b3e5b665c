#include "polereloc/extraction.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace polereloc {

void ExtractionParams::validate() const {
  if (!(cluster_distance > 0.0)) throw Error(ErrorKind::kConfig, "cluster_distance must be positive");
  if (min_points < 1) throw Error(ErrorKind::kConfig, "min_points must be at least 1");
}

std::vector<LabeledPoint> filter_landmark_points(const Frame& frame) {
  std::vector<LabeledPoint> out;
  std::copy_if(frame.points.begin(), frame.points.end(), std::back_inserter(out),
               [](const LabeledPoint& p) { return p.label.is_landmark(); });
  return out;
}

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::uint8_t> rank_;
};

struct CellHash {
  std::size_t operator()(const std::array<std::int64_t, 3>& c) const {
    std::size_t h = static_cast<std::size_t>(c[0]) * 73856093u;
    h ^= static_cast<std::size_t>(c[1]) * 19349663u;
    h ^= static_cast<std::size_t>(c[2]) * 83492791u;
    return h;
  }
};

}  // namespace

std::vector<std::vector<std::size_t>> euclidean_cluster(std::span<const LabeledPoint> points,
                                                        const ExtractionParams& params) {
  params.validate();
  const double cell = params.cluster_distance;
  const double r2 = cell * cell;

  // Any two points within `cell` of each other sit in adjacent grid cells.
  std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::size_t>, CellHash> grid;
  std::vector<std::array<std::int64_t, 3>> cell_of(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    cell_of[i] = {static_cast<std::int64_t>(std::floor(p.x / cell)), static_cast<std::int64_t>(std::floor(p.y / cell)),
                  static_cast<std::int64_t>(std::floor(p.z / cell))};
    grid[cell_of[i]].push_back(i);
  }

  DisjointSet sets(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::Vector3d pi = points[i].position();
    const auto& c = cell_of[i];
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j <= i) continue;
            if ((points[j].position() - pi).squaredNorm() <= r2) sets.unite(i, j);
          }
        }
      }
    }
  }

  std::unordered_map<std::size_t, std::size_t> group_of_root;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t root = sets.find(i);
    auto [it, inserted] = group_of_root.try_emplace(root, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  std::erase_if(groups, [&](const auto& g) { return g.size() < params.min_points; });
  return groups;
}

SemanticLabel vote_label(std::span<const LabeledPoint> points) {
  std::size_t poles = 0;
  std::size_t trunks = 0;
  for (const auto& p : points) {
    if (p.label.cls == LabelClass::kPole) ++poles;
    if (p.label.cls == LabelClass::kTrunk) ++trunks;
  }
  if (poles == 0 && trunks == 0) throw Error(ErrorKind::kInvalidArgument, "no landmark label");
  return trunks > poles ? SemanticLabel::Trunk() : SemanticLabel::Pole();
}

std::vector<Cluster> extract_clusters(const Frame& frame, const ExtractionParams& params) {
  params.validate();
  const std::vector<LabeledPoint> landmarks = filter_landmark_points(frame);

  std::vector<Cluster> clusters;
  for (LabelClass cls : {LabelClass::kPole, LabelClass::kTrunk}) {
    std::vector<LabeledPoint> same_class;
    std::copy_if(landmarks.begin(), landmarks.end(), std::back_inserter(same_class),
                 [cls](const LabeledPoint& p) { return p.label.cls == cls; });
    for (const auto& group : euclidean_cluster(same_class, params)) {
      std::vector<LabeledPoint> members;
      members.reserve(group.size());
      for (std::size_t i : group) members.push_back(same_class[i]);
      const SemanticLabel label = vote_label(members);
      clusters.push_back(make_cluster(label, std::move(members)));
    }
  }

  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.centroid2d.x() != b.centroid2d.x()) return a.centroid2d.x() < b.centroid2d.x();
    return a.centroid2d.y() < b.centroid2d.y();
  });
  for (std::size_t i = 0; i < clusters.size(); ++i) clusters[i].id = i;
  return clusters;
}

}  // namespace polereloc
