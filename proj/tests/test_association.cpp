#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "polereloc/association.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"

using namespace polereloc;

namespace {

Edge edge_at(double length, double clockwise_deg, ClusterId neighbor, SemanticLabel label = SemanticLabel::Pole()) {
  const double a = -clockwise_deg * std::numbers::pi / 180.0;
  return {0, neighbor, length, {std::cos(a), std::sin(a)}, label};
}

ClusterMap map_from(const std::vector<std::pair<Eigen::Vector2d, SemanticLabel>>& items) {
  ClusterMap m;
  for (const auto& [p, l] : items) m.insert(scenes::column(l, p));
  return m;
}

}  // namespace

namespace polereloc {
void PrintTo(const MatchPair& m, std::ostream* os) {
  *os << m.local_id << "->" << m.global_id << " (" << m.matched_edges << ")";
}
}  // namespace polereloc

TEST(NeighborEdges, IsolatedAndRadius) {
  ClusterMap m = map_from({{{0, 0}, SemanticLabel::Pole()}});
  EXPECT_TRUE(neighbor_edges(m, 0, 50.0).empty());
  m = map_from({{{0, 0}, SemanticLabel::Pole()},
                {{10, 0}, SemanticLabel::Pole()},
                {{0, 49}, SemanticLabel::Trunk()},
                {{-51, 0}, SemanticLabel::Pole()}});
  const auto e = neighbor_edges(m, 0, 50.0);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_NEAR(e[0].length, 10.0, 1e-12);
  EXPECT_NEAR(e[1].length, 49.0, 1e-12);
  EXPECT_EQ(e[1].neighbor_label, SemanticLabel::Trunk());
  EXPECT_NEAR(e[1].direction.norm(), 1.0, 1e-9);
}

TEST(NeighborEdges, LengthsMatchAllPairs) {
  std::mt19937_64 rng(1);
  const ClusterMap m = scenes::random_map(rng, 80, 120.0, 1.0);
  for (ClusterId id : m.ids()) {
    const auto edges = neighbor_edges(m, id, 50.0);
    const auto oracle_edges = oracle::all_edges(m, id, 50.0);
    ASSERT_EQ(edges.size(), oracle_edges.size());
    for (std::size_t i = 1; i < edges.size(); ++i) EXPECT_LE(edges[i - 1].length, edges[i].length);
    for (const Edge& e : edges) {
      EXPECT_NEAR(e.length, (m.at(e.neighbor_id).centroid2d - m.at(id).centroid2d).norm(), 1e-12);
    }
  }
}

TEST(Angles, ClockwiseConvention) {
  EXPECT_NEAR(clockwise_heading_deg({1, 0}), 0.0, 1e-12);
  EXPECT_NEAR(clockwise_heading_deg({0, -1}), 90.0, 1e-12);
  EXPECT_NEAR(clockwise_heading_deg({0, 1}), 270.0, 1e-12);
  EXPECT_NEAR(clockwise_angle_deg({0, 1}, {1, 0}), 90.0, 1e-12);
  EXPECT_NEAR(angle_difference_deg(359.0, 1.0), 2.0, 1e-12);
  EXPECT_NEAR(angle_difference_deg(10.0, 190.0), 180.0, 1e-12);
}

TEST(SubEdgeDistance, Examples) {
  EXPECT_EQ(sub_edge_distance({3, 40}, {3, 40}), 0.0);
  EXPECT_NEAR(sub_edge_distance({3, 0}, {4, 0}), 1.0, 1e-12);
  EXPECT_NEAR(sub_edge_distance({1, 0}, {1, 90}), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(sub_edge_distance({5.0, 30}, {5.2, 35}), 0.488, 5e-4);
}

TEST(SubEdgeDistance, SymmetricAndEqualsVectorDifference) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.0, 60.0), t(0.0, 360.0);
  for (int i = 0; i < 2000; ++i) {
    const SubEdgeFeature a{d(rng), t(rng)}, b{d(rng), t(rng)};
    EXPECT_EQ(sub_edge_distance(a, b), sub_edge_distance(b, a));
    const auto vec = [](const SubEdgeFeature& f) {
      const double r = f.theta * std::numbers::pi / 180.0;
      return Eigen::Vector2d(f.d * std::cos(r), -f.d * std::sin(r));
    };
    EXPECT_NEAR(sub_edge_distance(a, b), (vec(a) - vec(b)).norm(), 1e-9);
  }
}

TEST(MatchSubEdges, Examples) {
  const AssociationParams p;
  const auto pole = SemanticLabel::Pole();
  EXPECT_TRUE(match_sub_edges({5.0, 30}, {5.05, 30}, pole, pole, p));
  EXPECT_FALSE(match_sub_edges({5.0, 30}, {5.2, 35}, pole, pole, p));
  EXPECT_FALSE(match_sub_edges({5.0, 30}, {5.0, 30}, pole, SemanticLabel::Trunk(), p));
  // Across the 0/360 seam.
  EXPECT_TRUE(match_sub_edges({5.0, 359.5}, {5.0, 0.5}, pole, pole, p));
}

TEST(SubEdgeFeature, RelativeClockwiseAngle) {
  const Edge matching = edge_at(10, 30, 1);
  const Edge sub = edge_at(4, 100, 2);
  const auto f = sub_edge_feature(matching, sub);
  EXPECT_NEAR(f.d, 4.0, 1e-12);
  EXPECT_NEAR(f.theta, 70.0, 1e-9);
  EXPECT_NEAR(sub_edge_feature(sub, matching).theta, 290.0, 1e-9);
}

TEST(CandidateEdges, Examples) {
  const std::vector<Edge> g = {edge_at(3, 0, 1), edge_at(5, 0, 2), edge_at(9, 0, 3), edge_at(20, 0, 4)};
  EXPECT_EQ(candidate_edges(edge_at(5.1, 0, 9), g, 2), (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(candidate_edges(edge_at(5.1, 0, 9), g, 10).size(), 4u);
  EXPECT_TRUE(candidate_edges(edge_at(5.1, 0, 9), {}, 3).empty());
}

TEST(CandidateEdges, MatchesFullSortOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> len(0.5, 50.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Edge> g;
    const auto n = rng() % 30;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse lengths create plenty of exact ties.
      g.push_back(edge_at(trial % 2 ? std::round(len(rng)) : len(rng), 0, i));
    }
    const Edge target = edge_at(trial % 2 ? std::round(len(rng)) : len(rng), 0, 99);
    const std::size_t k = 1 + rng() % 7;
    std::vector<std::size_t> order(g.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(g[a].length - target.length) < std::abs(g[b].length - target.length);
    });
    order.resize(std::min(k, order.size()));
    EXPECT_EQ(candidate_edges(target, g, k), order);
  }
}

// Local edge 0 along +x with eight sub-edges; the global copy perturbs the
// sub-edge lengths.
class EdgePairDistance : public ::testing::Test {
 protected:
  std::vector<Edge> local_;
  std::vector<Edge> global_;
  void SetUp() override {
    local_.push_back(edge_at(30, 0, 100));
    global_.push_back(edge_at(30, 0, 200));
    for (int k = 0; k < 8; ++k) {
      local_.push_back(edge_at(5.0 + k, 40.0 * k + 10.0, k));
      global_.push_back(edge_at(5.0 + k, 40.0 * k + 10.0, 10 + k));
    }
  }
};

TEST_F(EdgePairDistance, AllMatchedIsZero) {
  // Perturb every sub-edge; all eight still pair, so ln(8/8) = 0.
  for (std::size_t k = 1; k < global_.size(); ++k) global_[k].length += 0.1;
  EXPECT_EQ(edge_pair_distance(0, 0, local_, global_, {}), 0.0);
}

TEST_F(EdgePairDistance, HalfMatchedWithTenCentimeterResiduals) {
  // Four sub-edges off by 0.1 m, four moved out of reach.
  for (std::size_t k = 1; k <= 4; ++k) global_[k].length += 0.1;
  for (std::size_t k = 5; k <= 8; ++k) global_[k].length += 2.0;
  AssociationParams p;
  p.n_se = 4;
  const auto score = edge_pair_score(0, 0, local_, global_, p);
  EXPECT_EQ(score.matched_sub_edges, 4u);
  EXPECT_NEAR(score.distance, std::log(2.0) * 0.1, 1e-9);
}

TEST_F(EdgePairDistance, TooFewIsUnmatched) {
  for (std::size_t k = 4; k <= 8; ++k) global_[k].length += 2.0;
  EXPECT_EQ(edge_pair_distance(0, 0, local_, global_, {}), kUnmatched);
}

TEST_F(EdgePairDistance, GlobalSubEdgeUsedOnce) {
  // Two local sub-edges compete for a single global one.
  std::vector<Edge> l = {edge_at(30, 0, 100), edge_at(10.0, 50, 1), edge_at(10.05, 50, 2)};
  std::vector<Edge> g = {edge_at(30, 0, 200), edge_at(10.02, 50, 11)};
  AssociationParams p;
  p.n_se = 1;
  const auto score = edge_pair_score(0, 0, l, g, p);
  EXPECT_EQ(score.matched_sub_edges, 1u);
  EXPECT_NEAR(score.distance, std::log(2.0) * 0.02, 1e-9);
}

TEST(MatchClusters, LabelMismatchAndIdentity) {
  std::mt19937_64 rng(4);
  const ClusterMap m = scenes::random_map(rng, 25, 60.0);
  AssociationParams p;
  for (ClusterId id : m.ids()) {
    const auto self = match_clusters(id, id, m, m, p);
    const auto n = neighbor_edges(m, id, p.search_radius).size();
    if (n >= p.n_e + 1) {
      EXPECT_TRUE(self.matched);
      EXPECT_EQ(self.matched_edges, n);
    }
  }
  ClusterMap a = map_from({{{0, 0}, SemanticLabel::Pole()}});
  ClusterMap b = map_from({{{0, 0}, SemanticLabel::Trunk()}});
  EXPECT_FALSE(match_clusters(0, 0, a, b, p).matched);
}

TEST(MatchClusters, AgreesWithOracleCounts) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const ClusterMap g = scenes::random_map(rng, 20, 50.0);
    const ClusterMap l = scenes::transformed(g, scenes::random_planar_pose(rng, 3.0, 30.0), 0.05, rng, true);
    AssociationParams p;
    p.n_candidates = 1000;  // unlimited, like the oracle
    for (ClusterId id : l.ids()) {
      EXPECT_EQ(match_clusters(id, id, l, g, p).matched_edges, oracle::matched_edges(l, id, g, id, p));
    }
  }
}

TEST(AssociateMaps, EmptyAndSelf) {
  std::mt19937_64 rng(6);
  const ClusterMap g = scenes::random_map(rng, 40, 80.0);
  EXPECT_TRUE(associate_maps(ClusterMap{}, g, {}).empty());
  const ClusterMap copy = g;
  const auto pairs = associate_maps(copy, g, {});
  EXPECT_FALSE(pairs.empty());
  for (const auto& mp : pairs) EXPECT_EQ(mp.local_id, mp.global_id);
  for (ClusterId id : g.ids()) {
    if (neighbor_edges(g, id, 50.0).size() >= 6) {
      EXPECT_TRUE(std::any_of(pairs.begin(), pairs.end(), [&](const MatchPair& m) { return m.local_id == id; }));
    }
  }
}

TEST(AssociateMaps, EqualsOracleOnSmallScenes) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 15; ++trial) {
    const ClusterMap g = scenes::random_map(rng, 12 + rng() % 18, 60.0);
    ClusterMap sub = scenes::subset(g, 0.8, rng);
    const ClusterMap l = scenes::transformed(sub, scenes::random_planar_pose(rng, 3.1, 50.0), 0.03, rng, true);
    AssociationParams p;
    p.n_candidates = 1000;  // the oracle tries every global edge
    EXPECT_EQ(associate_maps(l, g, p), oracle::associate(l, g, p)) << "trial " << trial;
  }
}

TEST(AssociateMaps, ThreadCountDoesNotMatter) {
  std::mt19937_64 rng(8);
  const ClusterMap g = scenes::random_map(rng, 120, 150.0);
  const ClusterMap l = scenes::transformed(scenes::subset(g, 0.7, rng), scenes::random_planar_pose(rng, 3.0, 40.0),
                                           0.05, rng, true);
  const auto one = associate_maps(l, g, {}, 1);
  EXPECT_EQ(associate_maps(l, g, {}, 4), one);
  EXPECT_EQ(associate_maps(l, g, {}, 1), one);
}

TEST(AssociateMaps, SubsetMostlyCorrect) {
  std::mt19937_64 rng(9);
  const ClusterMap g = scenes::random_map(rng, 200, 200.0, 5.0);
  std::size_t correct = 0, total = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const ClusterMap l = scenes::transformed(scenes::subset(g, 0.6, rng), scenes::random_planar_pose(rng, 3.0, 40.0),
                                             0.0, rng);
    for (const auto& mp : associate_maps(l, g, {})) {
      ++total;
      correct += mp.local_id == mp.global_id;
    }
  }
  ASSERT_GT(total, 0u);
  EXPECT_GE(static_cast<double>(correct), 0.9 * static_cast<double>(total));
}

TEST(AssociateMaps, RemovingGlobalClustersDoesNotCreateMatches) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const ClusterMap g = scenes::random_map(rng, 25, 60.0);
    const ClusterMap l = scenes::transformed(g, scenes::random_planar_pose(rng, 3.0, 20.0), 0.04, rng, true);
    const ClusterMap reduced = scenes::subset(g, 0.7, rng);
    AssociationParams p;
    p.n_candidates = 1000;
    for (ClusterId lid : l.ids()) {
      for (ClusterId gid : reduced.ids()) {
        // Edge-level check: an edge unmatched against the full map stays unmatched.
        const auto le = oracle::all_edges(l, lid, p.search_radius);
        const auto full = oracle::all_edges(g, gid, p.search_radius);
        const auto part = oracle::all_edges(reduced, gid, p.search_radius);
        for (std::size_t i = 0; i < le.size(); ++i) {
          double best_full = oracle::kNoMatch, best_part = oracle::kNoMatch;
          for (std::size_t j = 0; j < full.size(); ++j) best_full = std::min(best_full, oracle::edge_pair(le, i, full, j, p).distance);
          for (std::size_t j = 0; j < part.size(); ++j) best_part = std::min(best_part, oracle::edge_pair(le, i, part, j, p).distance);
          if (best_full == oracle::kNoMatch) EXPECT_EQ(best_part, oracle::kNoMatch);
        }
      }
    }
  }
}
