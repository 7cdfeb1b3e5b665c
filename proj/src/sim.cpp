#include "polereloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <unordered_map>

namespace polereloc {

namespace {

constexpr std::uint16_t kClutterCategory = 40;

std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Uniform grid with cell size min_spacing; a candidate only has to be
// checked against the 3x3 block around its cell.
class SpacingGrid {
 public:
  explicit SpacingGrid(double cell) : cell_(cell) {}

  bool admits(const Eigen::Vector2d& p) const {
    const auto [cx, cy] = cell_of(p);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (const Eigen::Vector2d& q : it->second) {
          if ((p - q).norm() < cell_) return false;
        }
      }
    }
    return true;
  }

  void add(const Eigen::Vector2d& p) {
    const auto [cx, cy] = cell_of(p);
    cells_[key(cx, cy)].push_back(p);
  }

 private:
  std::pair<std::int64_t, std::int64_t> cell_of(const Eigen::Vector2d& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_))};
  }
  static std::uint64_t key(std::int64_t x, std::int64_t y) {
    return (static_cast<std::uint64_t>(x) << 32) ^ (static_cast<std::uint64_t>(y) & 0xffffffffULL);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<Eigen::Vector2d>> cells_;
};

// Stratified helix on the cylinder surface: consecutive samples stay within
// a few decimeters of each other, so the landmark clusters as one object.
std::vector<Eigen::Vector3d> sample_cylinder(const Landmark& lm, std::size_t count, double sigma,
                                             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<Eigen::Vector3d> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double z = (static_cast<double>(i) + 0.5 + jitter(rng)) * lm.height / static_cast<double>(count);
    const double phi = 2.0 * std::numbers::pi * (static_cast<double>(i) + jitter(rng)) / 8.0;
    Eigen::Vector3d p(lm.base.x() + lm.radius * std::cos(phi), lm.base.y() + lm.radius * std::sin(phi), z);
    if (sigma > 0.0) p += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
    points.push_back(p);
  }
  return points;
}

}  // namespace

void SceneSpec::validate() const {
  if (!(area_x > 0.0) || !(area_y > 0.0)) throw Error(ErrorKind::kConfig, "scene area must be positive");
  if (!(min_spacing > 0.0)) throw Error(ErrorKind::kConfig, "min_spacing must be positive");
  if (!(pole_fraction >= 0.0 && pole_fraction <= 1.0)) throw Error(ErrorKind::kConfig, "pole_fraction outside [0, 1]");
  if (points_per_cluster == 0) throw Error(ErrorKind::kConfig, "points_per_cluster must be positive");
  if (!(point_noise_sigma >= 0.0)) throw Error(ErrorKind::kConfig, "point_noise_sigma must be non-negative");
}

void RunSpec::validate() const {
  if (!(loop_width > 0.0) || !(loop_height > 0.0)) throw Error(ErrorKind::kConfig, "loop size must be positive");
  if (!(corner_radius >= 0.0) || 2.0 * corner_radius > std::min(loop_width, loop_height)) {
    throw Error(ErrorKind::kConfig, "corner_radius must fit inside the loop");
  }
  if (!(distance >= 0.0)) throw Error(ErrorKind::kConfig, "distance must be non-negative");
  if (!(speed > 0.0) || !(rate > 0.0)) throw Error(ErrorKind::kConfig, "speed and rate must be positive");
  if (!(sensor_range > 0.0)) throw Error(ErrorKind::kConfig, "sensor_range must be positive");
  if (!(frame_noise_sigma >= 0.0)) throw Error(ErrorKind::kConfig, "frame_noise_sigma must be non-negative");
  if (!(label_flip_rate >= 0.0 && label_flip_rate <= 1.0)) {
    throw Error(ErrorKind::kConfig, "label_flip_rate outside [0, 1]");
  }
}

void DriftSpec::validate() const {
  if (!(translational_drift >= 0.0) || !(rotational_drift >= 0.0) || !(noise_sigma >= 0.0)) {
    throw Error(ErrorKind::kConfig, "drift parameters must be non-negative");
  }
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  scene.spec = spec;
  if (spec.n_clusters == 0) return scene;

  // Hexagonal packing bound: no arrangement fits more than this.
  const double packing = (spec.area_x + spec.min_spacing) * (spec.area_y + spec.min_spacing) /
                         (std::sqrt(3.0) / 2.0 * spec.min_spacing * spec.min_spacing);
  if (static_cast<double>(spec.n_clusters) > packing) {
    throw Error(ErrorKind::kConfig, "scene cannot hold n_clusters at min_spacing");
  }

  std::mt19937_64 rng = seeded(spec.seed, 0);
  std::uniform_real_distribution<double> ux(0.0, spec.area_x);
  std::uniform_real_distribution<double> uy(0.0, spec.area_y);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SpacingGrid grid(spec.min_spacing);
  const std::size_t max_attempts = 1000 * spec.n_clusters + 10000;
  std::size_t attempts = 0;
  while (scene.landmarks.size() < spec.n_clusters) {
    if (++attempts > max_attempts) {
      throw Error(ErrorKind::kConfig, "could not place " + std::to_string(spec.n_clusters) +
                                          " landmarks at the requested spacing");
    }
    const Eigen::Vector2d p(ux(rng), uy(rng));
    if (!grid.admits(p)) continue;
    grid.add(p);

    Landmark lm;
    lm.id = scene.landmarks.size();
    lm.base = p;
    if (unit(rng) < spec.pole_fraction) {
      lm.label = SemanticLabel::Pole();
      lm.radius = 0.05 + 0.07 * unit(rng);
      lm.height = 3.0 + 3.0 * unit(rng);
    } else {
      lm.label = SemanticLabel::Trunk();
      lm.radius = 0.15 + 0.15 * unit(rng);
      lm.height = 2.0 + 2.0 * unit(rng);
    }
    lm.points = sample_cylinder(lm, spec.points_per_cluster, spec.point_noise_sigma, rng);
    scene.landmarks.push_back(std::move(lm));
  }

  for (const Landmark& lm : scene.landmarks) {
    std::vector<LabeledPoint> pts;
    pts.reserve(lm.points.size());
    for (const Eigen::Vector3d& p : lm.points) pts.push_back({p.x(), p.y(), p.z(), lm.label});
    Cluster c = make_cluster(lm.label, std::move(pts));
    c.id = lm.id;
    scene.map.insert_with_id(std::move(c));
  }
  return scene;
}

LoopPath::LoopPath(const RunSpec& spec, const Eigen::Vector2d& center)
    : center_(center),
      half_x_(spec.loop_width / 2.0),
      half_y_(spec.loop_height / 2.0),
      radius_(spec.corner_radius) {
  length_ = 4.0 * (half_x_ - radius_) + 4.0 * (half_y_ - radius_) + 2.0 * std::numbers::pi * radius_;
}

PoseSE3 LoopPath::pose_at(double s) const {
  s = std::fmod(s, length_);
  if (s < 0.0) s += length_;
  const double arc = std::numbers::pi / 2.0 * radius_;
  // Side i runs along heading 90i degrees and is followed by a left turn.
  for (int side = 0; side < 4; ++side) {
    const double heading = side * std::numbers::pi / 2.0;
    const Eigen::Vector2d dir(std::cos(heading), std::sin(heading));
    const Eigen::Vector2d left(-dir.y(), dir.x());
    const double straight = 2.0 * ((side % 2 == 0) ? half_x_ - radius_ : half_y_ - radius_);
    const double half_across = (side % 2 == 0) ? half_y_ : half_x_;
    // Start of the straight: centered on the side, offset outward from the center.
    const Eigen::Vector2d start = center_ - left * half_across - dir * (straight / 2.0);
    if (s <= straight) {
      const Eigen::Vector2d p = start + dir * s;
      return PoseSE3::FromYaw(heading, {p.x(), p.y(), 0.0});
    }
    s -= straight;
    if (radius_ > 0.0 && s <= arc) {
      const Eigen::Vector2d c = start + dir * straight + left * radius_;
      const double phi = heading - std::numbers::pi / 2.0 + s / radius_;
      const Eigen::Vector2d p = c + radius_ * Eigen::Vector2d(std::cos(phi), std::sin(phi));
      return PoseSE3::FromYaw(heading + s / radius_, {p.x(), p.y(), 0.0});
    }
    s -= arc;
  }
  // Rounding can leave a sliver past the last corner.
  return pose_at(0.0);
}

LoopPath make_path(const Scene& scene, const RunSpec& run) {
  run.validate();
  return LoopPath(run, Eigen::Vector2d(scene.spec.area_x / 2.0, scene.spec.area_y / 2.0));
}

Frame observe(const Scene& scene, const RunSpec& run, const PoseSE3& pose, double timestamp,
              std::uint64_t stream_seed) {
  std::mt19937_64 rng = seeded(run.seed, stream_seed);
  std::normal_distribution<double> noise(0.0, run.frame_noise_sigma);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const PoseSE3 to_sensor = pose.inverse();
  const Eigen::Vector2d origin = pose.translation().head<2>();

  Frame frame;
  frame.timestamp = timestamp;
  for (const Landmark& lm : scene.landmarks) {
    if ((lm.base - origin).norm() > run.sensor_range) continue;
    SemanticLabel label = lm.label;
    if (run.label_flip_rate > 0.0 && unit(rng) < run.label_flip_rate) {
      label = label == SemanticLabel::Pole() ? SemanticLabel::Trunk() : SemanticLabel::Pole();
    }
    for (const Eigen::Vector3d& w : lm.points) {
      Eigen::Vector3d p = to_sensor * w;
      if (run.frame_noise_sigma > 0.0) p += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
      frame.points.push_back({p.x(), p.y(), p.z(), label});
    }
  }
  for (std::size_t i = 0; i < run.clutter_points; ++i) {
    const double r = run.sensor_range * std::sqrt(unit(rng));
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    frame.points.push_back({r * std::cos(phi), r * std::sin(phi), 3.0 * unit(rng),
                            SemanticLabel::Other(kClutterCategory)});
  }
  return frame;
}

SimRun simulate_run(const Scene& scene, const RunSpec& run, const DriftSpec& drift) {
  drift.validate();
  const LoopPath path = make_path(scene, run);
  const double step = run.speed / run.rate;
  const auto n_frames = static_cast<std::size_t>(std::floor(run.distance / step + 1e-9)) + 1;

  SimRun out;
  out.frames.reserve(n_frames);
  out.ground_truth.reserve(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    const double t = static_cast<double>(k) / run.rate;
    const PoseSE3 pose = path.pose_at(run.start_arc + static_cast<double>(k) * step);
    out.ground_truth.push_back({t, pose});
    out.frames.push_back(observe(scene, run, pose, t, k + 1));
  }

  std::mt19937_64 rng = seeded(drift.seed, 0);
  std::normal_distribution<double> noise(0.0, drift.noise_sigma);
  PoseSE3 odom = out.ground_truth.front().pose;
  out.odometry.push_back({out.ground_truth.front().timestamp, odom});
  for (std::size_t k = 1; k < n_frames; ++k) {
    const PoseSE3 truth = out.ground_truth[k - 1].pose.inverse() * out.ground_truth[k].pose;
    const double d = truth.translation().norm();
    Eigen::Vector3d t = truth.translation() * (1.0 + drift.translational_drift);
    if (drift.noise_sigma > 0.0) {
      t.x() += noise(rng);
      t.y() += noise(rng);
    }
    const PoseSE3 yaw_error = PoseSE3::FromYaw(deg2rad(drift.rotational_drift * d), Eigen::Vector3d::Zero());
    const PoseSE3 measured(truth.rotation() * yaw_error.rotation(), t);
    out.increments.push_back({out.ground_truth[k].timestamp, measured});
    odom = odom * measured;
    out.odometry.push_back({out.ground_truth[k].timestamp, odom});
  }
  return out;
}

SceneSpec standard_scene() { return SceneSpec{}; }

RunSpec standard_run() {
  RunSpec r;
  r.frame_noise_sigma = 0.02;
  return r;
}

DriftSpec standard_drift() {
  DriftSpec d;
  d.translational_drift = 0.01;
  d.rotational_drift = 0.01;
  d.noise_sigma = 0.01;
  return d;
}

}  // namespace polereloc
