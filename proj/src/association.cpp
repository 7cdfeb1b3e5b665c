#include "polereloc/association.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <thread>

namespace polereloc {

void AssociationParams::validate() const {
  if (!(search_radius > 0.0) || !(delta_d > 0.0) || !(delta_theta > 0.0) || !(delta_se > 0.0) || !(delta_e > 0.0)) {
    throw Error(ErrorKind::kConfig, "association thresholds must be positive");
  }
  if (n_se < 1 || n_e < 1 || n_candidates < 1) {
    throw Error(ErrorKind::kConfig, "association counts must be at least 1");
  }
}

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;

double wrap_deg(double a) {
  a = std::fmod(a, 360.0);
  if (a < 0.0) a += 360.0;
  if (a >= 360.0) a -= 360.0;
  return a;
}

// Positions of `sorted_lengths` that can be among the n entries closest to
// `target` under any tie-break that prefers the earlier of two equal lengths.
void length_window(std::span<const double> sorted_lengths, double target, std::size_t n,
                   std::vector<std::size_t>& out) {
  out.clear();
  const std::size_t size = sorted_lengths.size();
  if (size == 0 || n == 0) return;
  const auto b = static_cast<std::size_t>(std::lower_bound(sorted_lengths.begin(), sorted_lengths.end(), target) -
                                          sorted_lengths.begin());
  std::size_t lo = b >= n ? b - n : 0;
  const std::size_t hi = n >= size - b ? size : b + n;  // n may be "unlimited"
  // Equal lengths left of the window tie on gap and win on position.
  while (lo > 0 && sorted_lengths[lo - 1] == sorted_lengths[lo]) --lo;
  for (std::size_t i = lo; i < hi; ++i) out.push_back(i);
}

// Keeps the n entries of `idx` with the smallest (gap, key).
template <typename GapOf>
void keep_closest(std::vector<std::size_t>& idx, std::size_t n, GapOf gap_of) {
  const std::size_t keep = std::min(n, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double ga = gap_of(a);
                      const double gb = gap_of(b);
                      return ga != gb ? ga < gb : a < b;
                    });
  idx.resize(keep);
}

// Edges of one anchor in length order with precomputed headings.
struct EdgeTable {
  std::span<const Edge> edges;
  std::span<const double> lengths;
  std::span<const double> headings;
  std::size_t size() const { return edges.size(); }
};

struct SubEdgePair {
  double distance;
  ClusterId local_neighbor;
  ClusterId global_neighbor;
  std::uint32_t p;
  std::uint32_t q;
};

struct Scratch {
  std::vector<SubEdgePair> pairs;
  std::vector<char> used_local;
  std::vector<char> used_global;
  std::vector<std::size_t> candidates;
};

EdgePairScore score_edge_pair(const EdgeTable& local, std::size_t i, const EdgeTable& global, std::size_t j,
                              const AssociationParams& params, Scratch& scratch) {
  EdgePairScore score;
  const std::size_t k_l = local.size();
  const std::size_t k_g = global.size();
  // One-to-one pairing bounds k_se by both sub-edge set sizes.
  if (k_l - 1 < params.n_se || k_g - 1 < params.n_se) return score;

  auto& pairs = scratch.pairs;
  pairs.clear();
  std::size_t local_with_pair = 0;
  for (std::size_t p = 0; p < k_l; ++p) {
    if (p == i) continue;
    const double d_l = local.lengths[p];
    const double theta_l = wrap_deg(local.headings[p] - local.headings[i]);
    const SemanticLabel label_l = local.edges[p].neighbor_label;
    const auto first = std::lower_bound(global.lengths.begin(), global.lengths.end(), d_l - params.delta_d);
    bool found = false;
    for (auto q = static_cast<std::size_t>(first - global.lengths.begin());
         q < k_g && global.lengths[q] < d_l + params.delta_d; ++q) {
      if (q == j) continue;
      const double d_g = global.lengths[q];
      if (!(std::abs(d_l - d_g) < params.delta_d)) continue;
      if (global.edges[q].neighbor_label != label_l) continue;
      const double theta_g = wrap_deg(global.headings[q] - global.headings[j]);
      if (!(angle_difference_deg(theta_l, theta_g) < params.delta_theta)) continue;
      const double dist = sub_edge_distance({d_l, theta_l}, {d_g, theta_g});
      if (!(dist < params.delta_se)) continue;
      pairs.push_back({dist, local.edges[p].neighbor_id, global.edges[q].neighbor_id, static_cast<std::uint32_t>(p),
                       static_cast<std::uint32_t>(q)});
      found = true;
    }
    if (found) ++local_with_pair;
  }
  if (local_with_pair < params.n_se) return score;

  std::sort(pairs.begin(), pairs.end(), [](const SubEdgePair& a, const SubEdgePair& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.local_neighbor != b.local_neighbor) return a.local_neighbor < b.local_neighbor;
    return a.global_neighbor < b.global_neighbor;
  });
  scratch.used_local.assign(k_l, 0);
  scratch.used_global.assign(k_g, 0);
  std::size_t k_se = 0;
  double sum = 0.0;
  for (const auto& sp : pairs) {
    if (scratch.used_local[sp.p] || scratch.used_global[sp.q]) continue;
    scratch.used_local[sp.p] = 1;
    scratch.used_global[sp.q] = 1;
    ++k_se;
    sum += sp.distance;
  }
  score.matched_sub_edges = k_se;
  if (k_se < params.n_se) return score;
  const double k = static_cast<double>(k_se);
  score.distance = std::log(static_cast<double>(k_l - 1) / k) * (sum / k);
  return score;
}

ClusterMatch match_tables(SemanticLabel local_label, const EdgeTable& local, SemanticLabel global_label,
                          const EdgeTable& global, const AssociationParams& params, bool stop_early,
                          Scratch& scratch) {
  ClusterMatch result;
  if (local_label != global_label) return result;
  const std::size_t k_l = local.size();
  if (k_l < params.n_se + 1 || global.size() < params.n_se + 1) return result;
  if (stop_early && k_l < params.n_e) return result;

  std::size_t k_e = 0;
  for (std::size_t i = 0; i < k_l; ++i) {
    if (stop_early && k_e + (k_l - i) < params.n_e) break;
    const double target = local.lengths[i];
    length_window(global.lengths, target, params.n_candidates, scratch.candidates);
    keep_closest(scratch.candidates, params.n_candidates,
                 [&](std::size_t q) { return std::abs(global.lengths[q] - target); });
    double best = kUnmatched;
    for (std::size_t j : scratch.candidates) {
      best = std::min(best, score_edge_pair(local, i, global, j, params, scratch).distance);
    }
    if (best < params.delta_e) ++k_e;
  }
  result.matched_edges = k_e;
  result.matched = k_e >= params.n_e;
  return result;
}

// Length-sorted copy of an arbitrary edge list with headings.
struct SortedEdges {
  std::vector<Edge> edges;
  std::vector<double> lengths;
  std::vector<double> headings;
  std::vector<std::size_t> position_of;  // original index -> sorted position

  explicit SortedEdges(std::span<const Edge> input) {
    std::vector<std::size_t> order(input.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return input[a].length < input[b].length; });
    position_of.resize(input.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      position_of[order[k]] = k;
      edges.push_back(input[order[k]]);
      lengths.push_back(input[order[k]].length);
      headings.push_back(clockwise_heading_deg(input[order[k]].direction));
    }
  }
  EdgeTable table() const { return {edges, lengths, headings}; }
};

EdgeTable table_of(const MapSignature::ClusterSignature& s) { return {s.edges, s.lengths, s.headings}; }

}  // namespace

std::vector<Edge> neighbor_edges(const ClusterMap& map, ClusterId anchor, double search_radius) {
  const Cluster& a = map.at(anchor);
  std::vector<Edge> edges;
  for (ClusterId id : map.neighbors(anchor, search_radius)) {
    const Cluster& n = map.at(id);
    const Eigen::Vector2d v = n.centroid2d - a.centroid2d;
    const double length = v.norm();
    if (!(length > 0.0)) continue;
    edges.push_back({anchor, id, length, v / length, n.label});
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return x.length != y.length ? x.length < y.length : x.neighbor_id < y.neighbor_id;
  });
  return edges;
}

double clockwise_heading_deg(const Eigen::Vector2d& direction) {
  return wrap_deg(-std::atan2(direction.y(), direction.x()) * kRadToDeg);
}

double clockwise_angle_deg(const Eigen::Vector2d& from, const Eigen::Vector2d& to) {
  return wrap_deg(clockwise_heading_deg(to) - clockwise_heading_deg(from));
}

double angle_difference_deg(double a, double b) {
  const double diff = std::abs(wrap_deg(a) - wrap_deg(b));
  return std::min(diff, 360.0 - diff);
}

SubEdgeFeature sub_edge_feature(const Edge& matching, const Edge& sub) {
  return {sub.length, clockwise_angle_deg(matching.direction, sub.direction)};
}

double sub_edge_distance(const SubEdgeFeature& a, const SubEdgeFeature& b) {
  // d_a² + d_b² - 2 d_a d_b cos Δ rewritten as (d_a - d_b)² + 4 d_a d_b sin²(Δ/2),
  // which does not cancel catastrophically for nearly equal sub-edges.
  const double half = 0.5 * angle_difference_deg(a.theta, b.theta) / kRadToDeg;
  const double s = std::sin(half);
  const double dd = a.d - b.d;
  return std::sqrt(dd * dd + 4.0 * a.d * b.d * s * s);
}

bool match_sub_edges(const SubEdgeFeature& a, const SubEdgeFeature& b, SemanticLabel label_a, SemanticLabel label_b,
                     const AssociationParams& params) {
  return label_a == label_b && std::abs(a.d - b.d) < params.delta_d &&
         angle_difference_deg(a.theta, b.theta) < params.delta_theta && sub_edge_distance(a, b) < params.delta_se;
}

std::vector<std::size_t> candidate_edges(const Edge& target, std::span<const Edge> global_edges, std::size_t n) {
  const SortedEdges sorted(global_edges);
  std::vector<std::size_t> window;
  length_window(sorted.lengths, target.length, n, window);
  std::vector<std::size_t> original(sorted.edges.size());
  for (std::size_t k = 0; k < sorted.position_of.size(); ++k) original[sorted.position_of[k]] = k;
  std::vector<std::size_t> out;
  for (std::size_t pos : window) out.push_back(original[pos]);
  keep_closest(out, n, [&](std::size_t k) { return std::abs(global_edges[k].length - target.length); });
  return out;
}

EdgePairScore edge_pair_score(std::size_t local_index, std::size_t global_index, std::span<const Edge> local_edges,
                              std::span<const Edge> global_edges, const AssociationParams& params) {
  if (local_index >= local_edges.size() || global_index >= global_edges.size()) {
    throw Error(ErrorKind::kInvalidArgument, "edge index out of range");
  }
  const SortedEdges local(local_edges);
  const SortedEdges global(global_edges);
  Scratch scratch;
  return score_edge_pair(local.table(), local.position_of[local_index], global.table(),
                         global.position_of[global_index], params, scratch);
}

ClusterMatch match_clusters(ClusterId local_id, ClusterId global_id, const ClusterMap& local_map,
                            const ClusterMap& global_map, const AssociationParams& params) {
  params.validate();
  const Cluster& l = local_map.at(local_id);
  const Cluster& g = global_map.at(global_id);
  if (l.label != g.label) return {};
  const SortedEdges local(neighbor_edges(local_map, local_id, params.search_radius));
  const SortedEdges global(neighbor_edges(global_map, global_id, params.search_radius));
  Scratch scratch;
  return match_tables(l.label, local.table(), g.label, global.table(), params, false, scratch);
}

MapSignature::MapSignature(const ClusterMap& map, double search_radius) : search_radius_(search_radius) {
  map.rebuild_index();
  clusters_.reserve(map.size());
  for (const auto& [id, c] : map) {
    ClusterSignature s;
    s.id = id;
    s.label = c.label;
    s.edges = neighbor_edges(map, id, search_radius);
    for (const Edge& e : s.edges) {
      s.lengths.push_back(e.length);
      s.headings.push_back(clockwise_heading_deg(e.direction));
    }
    clusters_.push_back(std::move(s));
  }
}

ClusterMatch match_signatures(const MapSignature::ClusterSignature& local, const MapSignature::ClusterSignature& global,
                              const AssociationParams& params, bool stop_early) {
  Scratch scratch;
  return match_tables(local.label, table_of(local), global.label, table_of(global), params, stop_early, scratch);
}

std::vector<MatchPair> associate_maps(const MapSignature& local, const MapSignature& global,
                                      const AssociationParams& params, unsigned threads) {
  params.validate();
  if (local.search_radius() != params.search_radius || global.search_radius() != params.search_radius) {
    throw Error(ErrorKind::kInvalidArgument, "signature search radius differs from association parameters");
  }
  const auto& locals = local.clusters();
  const auto& globals = global.clusters();

  // Global clusters that could ever match: enough edges for n_se sub-edges.
  std::vector<const MapSignature::ClusterSignature*> eligible;
  for (const auto& g : globals) {
    if (g.edges.size() >= params.n_se + 1) eligible.push_back(&g);
  }

  std::vector<std::optional<MatchPair>> best(locals.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    Scratch scratch;
    for (std::size_t k = begin; k < locals.size(); k += stride) {
      const auto& l = locals[k];
      if (l.edges.size() < std::max(params.n_e, params.n_se + 1)) continue;
      for (const auto* g : eligible) {
        const ClusterMatch m = match_tables(l.label, table_of(l), g->label, table_of(*g), params, true, scratch);
        if (!m.matched) continue;
        // `eligible` is in ascending id order, so strict > keeps the lowest id on ties.
        if (!best[k] || m.matched_edges > best[k]->matched_edges) best[k] = MatchPair{l.id, g->id, m.matched_edges};
      }
    }
  };

  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(locals.size())));
  if (n_threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work, t, n_threads);
  }

  std::vector<MatchPair> out;
  for (const auto& b : best) {
    if (b) out.push_back(*b);
  }
  return out;
}

std::vector<MatchPair> associate_maps(const ClusterMap& local_map, const ClusterMap& global_map,
                                      const AssociationParams& params, unsigned threads) {
  params.validate();
  return associate_maps(MapSignature(local_map, params.search_radius), MapSignature(global_map, params.search_radius),
                        params, threads);
}

}  // namespace polereloc
