// Reference implementations used as test oracles. They favor the most
// literal formulation over speed and share no code with the library beyond
// the data types.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "polereloc/association.hpp"
#include "polereloc/cluster_map.hpp"
#include "polereloc/pose.hpp"

namespace oracle {

using polereloc::AssociationParams;
using polereloc::Cluster;
using polereloc::ClusterId;
using polereloc::ClusterMap;
using polereloc::LabeledPoint;
using polereloc::MatchPair;
using polereloc::PoseSE3;
using polereloc::SemanticLabel;

inline constexpr double kNoMatch = std::numeric_limits<double>::infinity();

struct RawEdge {
  ClusterId neighbor;
  Eigen::Vector2d vec;  // anchor -> neighbor
  SemanticLabel label;
};

// All neighbors within radius by scanning every cluster.
inline std::vector<RawEdge> all_edges(const ClusterMap& map, ClusterId anchor, double radius) {
  const Cluster& a = map.at(anchor);
  std::vector<RawEdge> out;
  for (const auto& [id, c] : map) {
    if (id == anchor) continue;
    const Eigen::Vector2d v = c.centroid2d - a.centroid2d;
    if (v.norm() <= radius && v.norm() > 0.0) out.push_back({id, v, c.label});
  }
  return out;
}

// Sub-edge expressed in a frame whose +x axis is the matching edge, with
// clockwise angles mapped to negative y: (d cos θ, -d sin θ).
inline Eigen::Vector2d in_edge_frame(const Eigen::Vector2d& edge, const Eigen::Vector2d& sub) {
  const Eigen::Vector2d x = edge.normalized();
  const Eigen::Vector2d y(-x.y(), x.x());
  return {sub.dot(x), sub.dot(y)};
}

inline double angle_between_deg(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

struct EdgePairResult {
  double distance = kNoMatch;
  std::size_t matched = 0;
};

inline EdgePairResult edge_pair(const std::vector<RawEdge>& local, std::size_t i, const std::vector<RawEdge>& global,
                                std::size_t j, const AssociationParams& p) {
  struct Cand {
    double dist;
    ClusterId ln, gn;
    std::size_t a, b;
  };
  std::vector<Cand> cands;
  std::vector<Eigen::Vector2d> global_frame(global.size());
  for (std::size_t b = 0; b < global.size(); ++b) global_frame[b] = in_edge_frame(global[j].vec, global[b].vec);
  for (std::size_t a = 0; a < local.size(); ++a) {
    if (a == i) continue;
    const Eigen::Vector2d pl = in_edge_frame(local[i].vec, local[a].vec);
    for (std::size_t b = 0; b < global.size(); ++b) {
      if (b == j) continue;
      if (!(local[a].label == global[b].label)) continue;
      const Eigen::Vector2d& pg = global_frame[b];
      if (!(std::abs(pl.norm() - pg.norm()) < p.delta_d)) continue;
      if (!(angle_between_deg(pl, pg) < p.delta_theta)) continue;
      const double dist = (pl - pg).norm();
      if (!(dist < p.delta_se)) continue;
      cands.push_back({dist, local[a].neighbor, global[b].neighbor, a, b});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    if (x.dist != y.dist) return x.dist < y.dist;
    if (x.ln != y.ln) return x.ln < y.ln;
    return x.gn < y.gn;
  });
  std::vector<bool> used_l(local.size()), used_g(global.size());
  EdgePairResult r;
  double sum = 0.0;
  for (const Cand& c : cands) {
    if (used_l[c.a] || used_g[c.b]) continue;
    used_l[c.a] = used_g[c.b] = true;
    ++r.matched;
    sum += c.dist;
  }
  if (r.matched >= p.n_se) {
    const double k = static_cast<double>(r.matched);
    r.distance = std::log(static_cast<double>(local.size() - 1) / k) * sum / k;
  }
  return r;
}

// Matched edge count of a cluster pair, trying every global edge as a candidate.
inline std::size_t matched_edges(const std::vector<RawEdge>& le, const std::vector<RawEdge>& ge,
                                 const AssociationParams& p) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < le.size(); ++i) {
    double best = kNoMatch;
    for (std::size_t j = 0; j < ge.size(); ++j) best = std::min(best, edge_pair(le, i, ge, j, p).distance);
    if (best < p.delta_e) ++k;
  }
  return k;
}

inline std::size_t matched_edges(const ClusterMap& lm, ClusterId l, const ClusterMap& gm, ClusterId g,
                                 const AssociationParams& p) {
  if (!(lm.at(l).label == gm.at(g).label)) return 0;
  return matched_edges(all_edges(lm, l, p.search_radius), all_edges(gm, g, p.search_radius), p);
}

inline std::vector<MatchPair> associate(const ClusterMap& lm, const ClusterMap& gm, const AssociationParams& p) {
  std::vector<std::vector<RawEdge>> global_edges;
  for (const auto& [g, gc] : gm) global_edges.push_back(all_edges(gm, g, p.search_radius));
  std::vector<MatchPair> out;
  for (const auto& [l, lc] : lm) {
    const auto le = all_edges(lm, l, p.search_radius);
    std::size_t best_k = 0;
    ClusterId best_g = 0;
    std::size_t gi = 0;
    for (const auto& [g, gc] : gm) {
      const auto& ge = global_edges[gi++];
      if (!(lc.label == gc.label)) continue;
      const std::size_t k = matched_edges(le, ge, p);
      if (k >= p.n_e && k > best_k) {
        best_k = k;
        best_g = g;
      }
    }
    if (best_k > 0) out.push_back({l, best_g, best_k});
  }
  return out;
}

// Least-squares rigid fit by Horn's quaternion method, independent of the
// SVD formulation in the library.
inline PoseSE3 horn_fit(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst) {
  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(src.size());
  Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) s += (src[i] - cs) * (dst[i] - cd).transpose();
  const double sxx = s(0, 0), sxy = s(0, 1), sxz = s(0, 2), syx = s(1, 0), syy = s(1, 1), syz = s(1, 2), szx = s(2, 0),
               szy = s(2, 1), szz = s(2, 2);
  Eigen::Matrix4d n;
  n << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,  //
      syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,   //
      szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,  //
      sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(n);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);
  const Eigen::Quaterniond rot(q(0), q(1), q(2), q(3));
  const Eigen::Matrix3d r = rot.normalized().toRotationMatrix();
  return PoseSE3(r, cd - r * cs);
}

}  // namespace oracle
