#include <gtest/gtest.h>

#include <random>

#include "polereloc/io.hpp"
#include "polereloc/registration.hpp"
#include "support/scenes.hpp"

using namespace polereloc;

namespace {

std::vector<Cluster> frame_clusters(std::initializer_list<std::pair<Eigen::Vector2d, SemanticLabel>> items) {
  std::vector<Cluster> out;
  ClusterId id = 0;
  for (const auto& [pos, label] : items) {
    Cluster c = scenes::column(label, pos);
    c.id = id++;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

TEST(TransformClusters, IdentityAndTranslation) {
  const auto in = frame_clusters({{{1, 2}, SemanticLabel::Pole()}, {{5, -3}, SemanticLabel::Trunk()}});
  const auto same = transform_clusters(in, PoseSE3::Identity());
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(same[i].centroid3d, in[i].centroid3d);
  const auto moved = transform_clusters(in, PoseSE3(Eigen::Matrix3d::Identity(), {1, 2, 0}));
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_LT((moved[i].centroid3d - in[i].centroid3d - Eigen::Vector3d(1, 2, 0)).norm(), 1e-12);
    EXPECT_EQ(moved[i].centroid2d, moved[i].centroid3d.head<2>());
  }
}

TEST(TransformClusters, CentroidOfTransformedPoints) {
  std::mt19937_64 rng(1);
  const auto in = frame_clusters({{{10, 2}, SemanticLabel::Pole()}, {{-5, 30}, SemanticLabel::Trunk()}});
  for (int trial = 0; trial < 50; ++trial) {
    const PoseSE3 pose(Eigen::Quaterniond::UnitRandom(), Eigen::Vector3d::Random() * 100.0);
    for (const Cluster& c : transform_clusters(in, pose)) {
      EXPECT_LT((compute_centroids(c.points).centroid3d - c.centroid3d).norm(), 1e-9);
    }
  }
}

TEST(RegisterFrame, EmptyMapTakesEveryCluster) {
  ClusterMap map;
  // Two clusters closer than the merge radius still both enter an empty map.
  const auto in = frame_clusters({{{0, 0}, SemanticLabel::Pole()}, {{0.5, 0}, SemanticLabel::Trunk()},
                                  {{10, 0}, SemanticLabel::Pole()}});
  const auto stats = register_frame(map, in, PoseSE3::Identity(), {});
  EXPECT_EQ(stats.inserted, 3u);
  EXPECT_EQ(stats.merged, 0u);
  EXPECT_EQ(map.size(), 3u);
}

TEST(RegisterFrame, MergeNearAndInsertFar) {
  ClusterMap map;
  register_frame(map, frame_clusters({{{0, 0}, SemanticLabel::Pole()}}), PoseSE3::Identity(), {});
  auto stats = register_frame(map, frame_clusters({{{0.2, 0}, SemanticLabel::Trunk()}}), PoseSE3::Identity(), {});
  EXPECT_EQ(stats.merged, 1u);
  EXPECT_EQ(map.size(), 1u);
  EXPECT_EQ(map.at(0).label, SemanticLabel::Pole());  // map label wins
  EXPECT_NEAR(map.at(0).centroid2d.x(), 0.1, 1e-12);  // equal point counts
  stats = register_frame(map, frame_clusters({{{20, 0}, SemanticLabel::Pole()}}), PoseSE3::Identity(), {});
  EXPECT_EQ(stats.inserted, 1u);
  EXPECT_EQ(map.size(), 2u);
}

TEST(RegisterFrame, StrictLabelsInsertsOnDisagreement) {
  ClusterMap map;
  register_frame(map, frame_clusters({{{0, 0}, SemanticLabel::Pole()}}), PoseSE3::Identity(), {});
  RegistrationParams strict;
  strict.strict_labels = true;
  const auto stats =
      register_frame(map, frame_clusters({{{0.2, 0}, SemanticLabel::Trunk()}}), PoseSE3::Identity(), strict);
  EXPECT_EQ(stats.inserted, 1u);
  EXPECT_EQ(map.size(), 2u);
}

TEST(RegisterFrame, UsesPose) {
  ClusterMap map;
  register_frame(map, frame_clusters({{{0, 0}, SemanticLabel::Pole()}}), PoseSE3::Identity(), {});
  // The same object seen from a vehicle 5 m further along x.
  const auto stats = register_frame(map, frame_clusters({{{-5, 0}, SemanticLabel::Pole()}}),
                                    PoseSE3(Eigen::Matrix3d::Identity(), {5, 0, 0}), {});
  EXPECT_EQ(stats.merged, 1u);
}

TEST(RegisterFrame, InvalidPoseThrows) {
  ClusterMap map;
  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(0, 0) = 2.0;
  EXPECT_THROW(register_frame(map, frame_clusters({{{0, 0}, SemanticLabel::Pole()}}), PoseSE3(bad, {0, 0, 0}), {}),
               Error);
}

TEST(RegisterFrame, SizeAccountingAndIdempotence) {
  std::mt19937_64 rng(2);
  ClusterMap map;
  for (int k = 0; k < 20; ++k) {
    std::vector<Cluster> frame;
    for (const auto& p : scenes::spaced_positions(rng, 15, 100.0, 3.0)) {
      frame.push_back(scenes::column(rng() % 2 ? SemanticLabel::Pole() : SemanticLabel::Trunk(), p));
    }
    const auto pose = scenes::random_planar_pose(rng, 3.0, 20.0);
    const std::size_t before = map.size();
    const auto stats = register_frame(map, frame, pose, {});
    EXPECT_EQ(map.size(), before + stats.inserted);
    EXPECT_EQ(stats.inserted + stats.merged, frame.size());
    const auto again = register_frame(map, frame, pose, {});
    EXPECT_EQ(again.inserted, 0u);
    EXPECT_EQ(again.merged, frame.size());
  }
}

TEST(RegisterFrame, MergedCentroidIsMassWeightedMean) {
  ClusterMap map;
  Cluster big = scenes::column(SemanticLabel::Pole(), {0, 0}, 30);
  register_frame(map, {big}, PoseSE3::Identity(), {});
  Cluster small = scenes::column(SemanticLabel::Pole(), {0.6, 0.3}, 10);
  register_frame(map, {small}, PoseSE3::Identity(), {});
  const Eigen::Vector3d want = (30.0 * big.centroid3d + 10.0 * small.centroid3d) / 40.0;
  EXPECT_LT((map.at(0).centroid3d - want).norm(), 1e-9);
  EXPECT_EQ(map.at(0).point_count, 40u);
}

TEST(LocalMap, SizesAndRoundTrip) {
  EXPECT_TRUE(build_local_map({}, PoseSE3::Identity()).empty());
  std::mt19937_64 rng(3);
  std::vector<Cluster> frame;
  for (const auto& p : scenes::spaced_positions(rng, 25, 80.0, 2.0)) frame.push_back(scenes::column(SemanticLabel::Pole(), p));
  const PoseSE3 pose = scenes::random_planar_pose(rng, 3.0, 50.0);
  const ClusterMap local = build_local_map(frame, pose);
  ASSERT_EQ(local.size(), frame.size());
  const EncodedMap enc = encode_map(local, LabelDictionary{});
  const ClusterMap back = decode_map(enc.text, std::string_view(enc.points));
  for (const auto& [id, c] : local) {
    EXPECT_EQ(back.at(id).centroid3d, c.centroid3d);
    EXPECT_EQ(back.at(id).centroid2d, c.centroid2d);
  }
}
