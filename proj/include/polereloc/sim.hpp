#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "polereloc/cluster_map.hpp"
#include "polereloc/localization.hpp"
#include "polereloc/pose.hpp"
#include "polereloc/types.hpp"

namespace polereloc {

/// Synthetic field of poles and trunks. Landmarks are vertical cylinders
/// sampled on their surface.
struct SceneSpec {
  double area_x = 320.0;  // meters
  double area_y = 320.0;
  std::size_t n_clusters = 300;
  double pole_fraction = 0.5;
  double min_spacing = 5.0;  // minimum 2D distance between landmarks
  std::size_t points_per_cluster = 30;
  double point_noise_sigma = 0.02;
  std::uint64_t seed = 7;

  void validate() const;
};

struct Landmark {
  ClusterId id = 0;
  SemanticLabel label;
  Eigen::Vector2d base = Eigen::Vector2d::Zero();
  double radius = 0.0;
  double height = 0.0;
  std::vector<Eigen::Vector3d> points;  // world frame
};

struct Scene {
  SceneSpec spec;
  std::vector<Landmark> landmarks;  // landmark i carries id i
  ClusterMap map;                   // one cluster per landmark, same ids
};

/// Rejection-sampled placement with every pair at least min_spacing apart.
/// Throws kConfig when the landmarks do not fit.
Scene generate_scene(const SceneSpec& spec);

/// Closed rounded-rectangle route, centered on the scene, driven
/// counter-clockwise.
struct RunSpec {
  double loop_width = 200.0;
  double loop_height = 200.0;
  double corner_radius = 20.0;
  double start_arc = 0.0;  // arc length along the loop where the run starts
  double distance = 500.0;
  double speed = 10.0;  // m/s
  double rate = 10.0;   // frames per second
  double sensor_range = 60.0;
  double frame_noise_sigma = 0.0;  // extra per-frame point noise
  double label_flip_rate = 0.0;    // pole <-> trunk
  std::size_t clutter_points = 0;  // unlabeled returns per frame
  std::uint64_t seed = 11;

  void validate() const;
};

/// Odometry corruption. Each step of length d is scaled by
/// (1 + translational_drift), yawed by rotational_drift * d degrees, and
/// perturbed by planar Gaussian noise.
struct DriftSpec {
  double translational_drift = 0.0;  // fraction of distance
  double rotational_drift = 0.0;     // degrees per meter
  double noise_sigma = 0.0;          // meters per step
  std::uint64_t seed = 13;

  void validate() const;
};

class LoopPath {
 public:
  LoopPath(const RunSpec& spec, const Eigen::Vector2d& center);

  double length() const { return length_; }
  /// Pose at arc length s (wrapped); x points along the direction of travel.
  PoseSE3 pose_at(double s) const;

 private:
  Eigen::Vector2d center_;
  double half_x_;
  double half_y_;
  double radius_;
  double length_;
};

LoopPath make_path(const Scene& scene, const RunSpec& run);

struct SimRun {
  std::vector<Frame> frames;                  // sensor frame
  std::vector<StampedPose> ground_truth;      // world <- sensor
  std::vector<StampedPose> odometry;          // drifting, starts at ground truth
  std::vector<OdometryIncrement> increments;  // increments[k]: frame k -> k + 1
};

/// Frame of the landmarks visible from `pose`, in the sensor frame.
Frame observe(const Scene& scene, const RunSpec& run, const PoseSE3& pose, double timestamp, std::uint64_t stream_seed);

SimRun simulate_run(const Scene& scene, const RunSpec& run, const DriftSpec& drift);

/// Settings used by the bundled benchmarks.
SceneSpec standard_scene();
RunSpec standard_run();
DriftSpec standard_drift();

}  // namespace polereloc
