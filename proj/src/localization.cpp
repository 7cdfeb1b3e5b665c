#include "polereloc/localization.hpp"

#include <cmath>
#include <future>
#include <sstream>

#include "polereloc/registration.hpp"

namespace polereloc {

void PipelineConfig::validate() const {
  if (!(reloc_period > 0.0)) throw Error(ErrorKind::kConfig, "reloc_period must be positive");
  if (fix_gate < 0.0) throw Error(ErrorKind::kConfig, "fix_gate must be non-negative");
}

DriftCorrector::DriftCorrector(const PoseSE3& initial_anchor, double start_timestamp, double fix_gate)
    : state_{initial_anchor, PoseSE3::Identity(), initial_anchor},
      start_timestamp_(start_timestamp),
      latest_timestamp_(start_timestamp),
      fix_gate_(fix_gate) {}

AnchoredPose DriftCorrector::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

PoseSE3 DriftCorrector::output() const {
  std::lock_guard lock(mutex_);
  return state_.output;
}

double DriftCorrector::latest_timestamp() const {
  std::lock_guard lock(mutex_);
  return latest_timestamp_;
}

void DriftCorrector::apply_increment(const OdometryIncrement& increment) {
  std::lock_guard lock(mutex_);
  if (!(increment.timestamp > latest_timestamp_)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "odometry increment at t=" << increment.timestamp << " not after t=" << latest_timestamp_;
    throw LocalizationError(LocalizationError::Reason::kOutOfOrder, msg.str());
  }
  state_.accumulated = state_.accumulated * increment.relative_pose;
  if (++compositions_since_renormalize_ >= kRenormalizeEvery) {
    state_.accumulated = state_.accumulated.renormalized();
    compositions_since_renormalize_ = 0;
  }
  state_.output = state_.anchor * state_.accumulated;
  latest_timestamp_ = increment.timestamp;

  window_.push_back(increment);
  if (window_.size() > kRetainedIncrements) {
    newest_dropped_ = window_.front().timestamp;
    window_.pop_front();
  }
}

void DriftCorrector::apply_global_fix(const PoseSE3& fix, double fix_timestamp) {
  std::lock_guard lock(mutex_);
  if (fix_timestamp > latest_timestamp_) {
    throw LocalizationError(LocalizationError::Reason::kFutureFix, "fix is newer than the latest increment");
  }
  if (fix_timestamp < start_timestamp_ || (newest_dropped_ && fix_timestamp < *newest_dropped_)) {
    throw LocalizationError(LocalizationError::Reason::kStaleFix, "stale-fix");
  }

  PoseSE3 accumulated;
  for (const OdometryIncrement& inc : window_) {
    if (inc.timestamp > fix_timestamp) accumulated = accumulated * inc.relative_pose;
  }
  const PoseSE3 output = fix * accumulated;
  if (fix_gate_ > 0.0 && translation_error(output, state_.output) > fix_gate_) {
    throw LocalizationError(LocalizationError::Reason::kGated, "fix exceeds the gating threshold");
  }
  state_ = {fix, accumulated, output};
  compositions_since_renormalize_ = 0;
}

namespace {

struct PendingFix {
  std::size_t due_frame;
  double timestamp;
  std::future<RelocOutcome> outcome;
};

}  // namespace

PipelineResult run_pipeline(const PipelineInput& input, const ClusterMap& global_map,
                            const PipelineSettings& settings) {
  settings.pipeline.validate();
  settings.extraction.validate();
  settings.association.validate();
  settings.reloc.validate();
  if (input.frames.empty()) return {};
  if (input.increments.size() + 1 != input.frames.size()) {
    throw Error(ErrorKind::kData, "expected one odometry increment between consecutive frames");
  }
  for (std::size_t k = 0; k < input.increments.size(); ++k) {
    if (std::abs(input.increments[k].timestamp - input.frames[k + 1].timestamp) > 1e-9) {
      throw Error(ErrorKind::kData, "odometry and frame timestamps are not aligned at frame " + std::to_string(k + 1));
    }
  }

  const auto& cfg = settings.pipeline;
  PipelineResult result;
  DriftCorrector corrector(input.initial_pose, input.frames.front().timestamp, cfg.fix_gate);
  std::optional<MapSignature> signature;
  if (cfg.relocalization_enabled) signature.emplace(global_map, settings.association.search_radius);

  std::deque<PendingFix> pending;
  std::optional<double> last_attempt;
  for (std::size_t k = 0; k < input.frames.size(); ++k) {
    const Frame& frame = input.frames[k];
    if (k > 0) corrector.apply_increment(input.increments[k - 1]);

    if (cfg.relocalization_enabled && (!last_attempt || frame.timestamp - *last_attempt >= cfg.reloc_period - 1e-9)) {
      last_attempt = frame.timestamp;
      auto job = [&settings, &global_map, &signature, &frame] {
        const ClusterMap local =
            build_local_map(extract_clusters(frame, settings.extraction), PoseSE3::Identity());
        return relocalize(local, global_map, *signature, settings.association, settings.reloc);
      };
      const auto policy = cfg.background_worker ? std::launch::async : std::launch::deferred;
      pending.push_back({k + cfg.reloc_latency_frames, frame.timestamp, std::async(policy, job)});
    }

    while (!pending.empty() && pending.front().due_frame <= k) {
      PendingFix fix = std::move(pending.front());
      pending.pop_front();
      const RelocOutcome outcome = fix.outcome.get();
      PipelineEvent event;
      event.timestamp = fix.timestamp;
      event.success = outcome.ok();
      if (!outcome.ok()) {
        event.detail = to_string(outcome.failure);
      } else {
        try {
          corrector.apply_global_fix(outcome.result->pose, fix.timestamp);
          event.applied = true;
          ++result.fixes_applied;
        } catch (const LocalizationError& e) {
          event.detail = e.what();
        }
      }
      result.events.push_back(std::move(event));
    }

    result.trajectory.push_back({frame.timestamp, corrector.output()});
  }
  // Fixes still in flight past the last frame are discarded.
  for (auto& p : pending) p.outcome.wait();
  return result;
}

}  // namespace polereloc
