#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace polereloc {

/// Static kd-tree over a fixed point set. Nodes live implicitly in a
/// permuted index array (median at the middle of each range), so the tree
/// is a flat vector with no per-node allocation.
///
/// Every point carries a key; nearest() breaks distance ties by lowest key.
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  KdTree() = default;

  void build(std::vector<Point> points, std::vector<std::uint64_t> keys) {
    points_ = std::move(points);
    keys_ = std::move(keys);
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    axes_.assign(points_.size(), 0);
    build_range(0, order_.size());
  }

  void build(std::vector<Point> points) {
    std::vector<std::uint64_t> keys(points.size());
    std::iota(keys.begin(), keys.end(), std::uint64_t{0});
    build(std::move(points), std::move(keys));
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point& point(std::size_t i) const { return points_[i]; }
  std::uint64_t key(std::size_t i) const { return keys_[i]; }

  /// Indices of all points with squared distance <= radius², unordered.
  void radius_search(const Point& query, double radius, std::vector<std::size_t>& out) const {
    out.clear();
    if (points_.empty()) return;
    radius_recursive(query, radius * radius, 0, order_.size(), out);
  }

  struct Hit {
    std::size_t index;
    double squared_distance;
  };

  /// Closest point accepted by `pred(index)`; ties go to the lowest key.
  template <typename Pred>
  std::optional<Hit> nearest(const Point& query, Pred&& pred) const {
    std::optional<Hit> best;
    if (!points_.empty()) nearest_recursive(query, 0, order_.size(), pred, best);
    return best;
  }

  std::optional<Hit> nearest(const Point& query) const {
    return nearest(query, [](std::size_t) { return true; });
  }

 private:
  void build_range(std::size_t lo, std::size_t hi) {
    if (hi - lo <= 1) return;
    Point min_c = points_[order_[lo]];
    Point max_c = min_c;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      min_c = min_c.cwiseMin(points_[order_[i]]);
      max_c = max_c.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (max_c - min_c).maxCoeff(&axis);
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    axes_[mid] = axis;
    build_range(lo, mid);
    build_range(mid + 1, hi);
  }

  void radius_recursive(const Point& q, double r2, std::size_t lo, std::size_t hi,
                        std::vector<std::size_t>& out) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::size_t idx = order_[mid];
    if ((points_[idx] - q).squaredNorm() <= r2) out.push_back(idx);
    if (hi - lo == 1) return;
    const int axis = axes_[mid];
    const double diff = q[axis] - points_[idx][axis];
    if (diff <= 0.0 || diff * diff <= r2) radius_recursive(q, r2, lo, mid, out);
    if (diff >= 0.0 || diff * diff <= r2) radius_recursive(q, r2, mid + 1, hi, out);
  }

  template <typename Pred>
  void nearest_recursive(const Point& q, std::size_t lo, std::size_t hi, Pred& pred,
                         std::optional<Hit>& best) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::size_t idx = order_[mid];
    if (pred(idx)) {
      const double d2 = (points_[idx] - q).squaredNorm();
      if (!best || d2 < best->squared_distance ||
          (d2 == best->squared_distance && keys_[idx] < keys_[best->index])) {
        best = Hit{idx, d2};
      }
    }
    if (hi - lo == 1) return;
    const int axis = axes_[mid];
    const double diff = q[axis] - points_[idx][axis];
    const bool left_first = diff <= 0.0;
    const auto near_lo = left_first ? lo : mid + 1;
    const auto near_hi = left_first ? mid : hi;
    const auto far_lo = left_first ? mid + 1 : lo;
    const auto far_hi = left_first ? hi : mid;
    nearest_recursive(q, near_lo, near_hi, pred, best);
    // <= keeps equal-distance points on the far side reachable for the key tie-break.
    if (!best || diff * diff <= best->squared_distance) nearest_recursive(q, far_lo, far_hi, pred, best);
  }

  std::vector<Point> points_;
  std::vector<std::uint64_t> keys_;
  std::vector<std::size_t> order_;
  std::vector<int> axes_;
};

}  // namespace polereloc
