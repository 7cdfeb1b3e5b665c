#pragma once

#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "polereloc/association.hpp"
#include "polereloc/cluster_map.hpp"
#include "polereloc/extraction.hpp"
#include "polereloc/pose.hpp"
#include "polereloc/relocalization.hpp"

namespace polereloc {

/// Odometry motion from the previous frame to the frame at `timestamp`.
struct OdometryIncrement {
  double timestamp = 0.0;
  PoseSE3 relative_pose;
};

/// Global pose = anchor ∘ accumulated, where anchor is the latest global fix
/// and accumulated the product of odometry increments recorded after it.
struct AnchoredPose {
  PoseSE3 anchor;
  PoseSE3 accumulated;
  PoseSE3 output;
};

enum class LocalMapMode { kSingleFrame };

struct PipelineConfig {
  double reloc_period = 0.5;  // seconds between relocalization attempts (2 Hz)
  LocalMapMode local_map_mode = LocalMapMode::kSingleFrame;
  bool relocalization_enabled = true;
  // A fix computed on frame k is applied after frame k + latency is ingested.
  std::size_t reloc_latency_frames = 0;
  // Reject fixes that move the output by more than this many meters; 0 disables.
  double fix_gate = 0.0;
  bool background_worker = true;

  void validate() const;
};

class LocalizationError : public Error {
 public:
  enum class Reason { kOutOfOrder, kStaleFix, kFutureFix, kGated };

  LocalizationError(Reason reason, const std::string& what)
      : Error(ErrorKind::kInvalidArgument, what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

/// Composes odometry increments onto the latest relocalization anchor.
/// Increment ingestion and fix application serialize on an internal mutex,
/// so one producer of each may run concurrently.
class DriftCorrector {
 public:
  static constexpr std::size_t kRetainedIncrements = 512;
  static constexpr std::size_t kRenormalizeEvery = 100;

  explicit DriftCorrector(const PoseSE3& initial_anchor = PoseSE3::Identity(), double start_timestamp = 0.0,
                          double fix_gate = 0.0);

  AnchoredPose state() const;
  PoseSE3 output() const;
  double latest_timestamp() const;

  /// accumulated ← accumulated ∘ increment. Timestamps must strictly increase.
  void apply_increment(const OdometryIncrement& increment);

  /// Re-anchors on a global pose observed at `fix_timestamp`: the anchor
  /// becomes the fix and accumulated the product of the retained increments
  /// stamped after it. Throws kStaleFix when some of those increments were
  /// already discarded, kFutureFix past the latest increment, and kGated
  /// when the gate is enabled and exceeded; the state is untouched then.
  void apply_global_fix(const PoseSE3& fix, double fix_timestamp);

 private:
  mutable std::mutex mutex_;
  AnchoredPose state_;
  double start_timestamp_;
  double latest_timestamp_;
  double fix_gate_;
  std::deque<OdometryIncrement> window_;
  std::optional<double> newest_dropped_;
  std::size_t compositions_since_renormalize_ = 0;
};

struct PipelineSettings {
  ExtractionParams extraction;
  AssociationParams association;
  RelocParams reloc;
  PipelineConfig pipeline;
};

/// Frames with the odometry between them: increments[k] moves frame k to
/// frame k + 1 and carries frames[k + 1].timestamp.
struct PipelineInput {
  std::vector<Frame> frames;
  std::vector<OdometryIncrement> increments;
  PoseSE3 initial_pose;
};

struct PipelineEvent {
  double timestamp = 0.0;  // frame the attempt ran on
  bool success = false;
  bool applied = false;
  std::string detail;
};

struct PipelineResult {
  std::vector<StampedPose> trajectory;
  std::vector<PipelineEvent> events;
  std::size_t fixes_applied = 0;
};

/// Emits one pose per frame. Every reloc_period a relocalization of the
/// current frame's local map (sensor frame) against `global_map` runs; a
/// successful result is the vehicle's global pose and is applied as a fix.
/// Failures are recorded and skipped.
PipelineResult run_pipeline(const PipelineInput& input, const ClusterMap& global_map,
                            const PipelineSettings& settings);

}  // namespace polereloc
