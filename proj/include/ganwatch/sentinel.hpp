// Copyright 2026 The ganwatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// The early-stopping state machine: consumes per-epoch loss records and
// per-interval metric snapshots, tracks pathology persistence and metric
// stagnation against calibrated baselines, and produces the stop decision.

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "ganwatch/calibration.hpp"
#include "ganwatch/error.hpp"
#include "ganwatch/loss_patterns.hpp"
#include "ganwatch/metrics.hpp"
#include "ganwatch/telemetry.hpp"

namespace ganwatch {

struct SentinelConfig {
  std::int64_t max_epochs = 1000;
  /// Epochs a stop condition must persist before training halts.
  std::int64_t patience = 200;
  /// Epoch spacing between metric snapshots.
  std::int64_t eval_interval = 50;
  /// When true, a snapshot only counts toward stagnation if the current loss
  /// window is constant (the literal reading of the stopping algorithm);
  /// off by default so metrics are judged every interval.
  bool gate_on_constancy = false;
  /// Whether metric snapshots will be fed at all; loss-only monitoring
  /// relaxes the patience/eval_interval coupling.
  bool metrics_enabled = true;
  DetectorConfig detector;
  ThresholdMode threshold_mode = ThresholdMode::Min;

  void validate() const {
    if (max_epochs < 1) throw ValidationError("sentinel config: max_epochs must be >= 1");
    if (patience < 1) throw ValidationError("sentinel config: patience must be >= 1");
    if (eval_interval < 1) {
      throw ValidationError("sentinel config: eval_interval must be >= 1");
    }
    if (metrics_enabled && patience < eval_interval) {
      throw ValidationError(
          "sentinel config: patience must be >= eval_interval when metric stopping is enabled");
    }
    detector.validate();
  }
};

enum class StopReason { NotStopped, LossPathologyPersistence, MetricStagnation, MaxEpochsReached };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::NotStopped: return "not-stopped";
    case StopReason::LossPathologyPersistence: return "loss-pathology-persistence";
    case StopReason::MetricStagnation: return "metric-stagnation";
    case StopReason::MaxEpochsReached: return "max-epochs-reached";
  }
  return "not-stopped";
}

inline StopReason stop_reason_from_string(std::string_view s) {
  if (s == "not-stopped") return StopReason::NotStopped;
  if (s == "loss-pathology-persistence") return StopReason::LossPathologyPersistence;
  if (s == "metric-stagnation") return StopReason::MetricStagnation;
  if (s == "max-epochs-reached") return StopReason::MaxEpochsReached;
  throw ValidationError("unknown stop reason: \"" + std::string(s) + "\"");
}

struct StopDecision {
  bool stopped = false;
  std::int64_t stop_epoch = 0;
  StopReason reason = StopReason::NotStopped;
  double best_msssim = 0.0;
  double best_fid = 0.0;
  std::int64_t best_epoch = 0;

  friend bool operator==(const StopDecision&, const StopDecision&) = default;
};

enum class ObserveStatus { Continue, Stop };

struct EpochOutcome {
  ObserveStatus status = ObserveStatus::Continue;
  /// Classification of the window ending at this epoch, present once the
  /// trailing buffer holds a full detector window.
  std::optional<PathologyEvent> event;
};

struct EvalOutcome {
  ObserveStatus status = ObserveStatus::Continue;
  /// Whether this snapshot jointly improved both best scores.
  bool improved = false;
  /// Whether the constancy gate suppressed this snapshot's effect.
  bool gated = false;
};

struct SentinelState {
  SentinelConfig cfg;
  Thresholds thresholds;
  std::optional<std::int64_t> current_epoch;
  /// Consecutive pathological window count (resets on any clean window).
  std::int64_t loss_problem_count = 0;
  /// Epoch of the first window of the current pathological streak.
  std::optional<std::int64_t> streak_start;
  double best_msssim = 0.0;
  double best_fid = 0.0;
  std::int64_t best_epoch = 0;
  std::int64_t epochs_since_improvement = 0;
  std::deque<double> recent_g;
  std::deque<double> recent_d;
  std::deque<std::int64_t> recent_epochs;
  /// Maximal same-kind window runs, in epoch order.
  std::vector<PathologyEvent> events;
  std::vector<MetricsSnapshot> snapshots;
  StopDecision verdict;
};

/// Fresh state: counters zeroed, best scores seeded from the calibrated
/// thresholds under the configured mode.
inline SentinelState sentinel_new(const SentinelConfig& cfg, const Thresholds& th) {
  cfg.validate();
  th.validate();
  SentinelState st;
  st.cfg = cfg;
  st.thresholds = th;
  const EffectiveBests bests = effective_bests(th, cfg.threshold_mode);
  st.best_msssim = bests.best_msssim;
  st.best_fid = bests.best_fid;
  st.verdict.best_msssim = bests.best_msssim;
  st.verdict.best_fid = bests.best_fid;
  return st;
}

namespace detail {

inline void append_event(SentinelState& st, const PathologyEvent& ev) {
  if (!st.events.empty() && st.events.back().kind == ev.kind) {
    st.events.back().epoch_end = ev.epoch_end;
    st.events.back().evidence = ev.evidence;
    return;
  }
  st.events.push_back(ev);
}

inline void mark_stop(SentinelState& st, std::int64_t epoch, StopReason reason) {
  st.verdict.stopped = true;
  st.verdict.stop_epoch = std::min(epoch, st.cfg.max_epochs);
  st.verdict.reason = reason;
  st.verdict.best_msssim = st.best_msssim;
  st.verdict.best_fid = st.best_fid;
  st.verdict.best_epoch = st.best_epoch;
}

}  // namespace detail

/// Consumes one loss record. Epochs must be strictly increasing (gaps are
/// tolerated; regressions are errors). Pathology is judged on full trailing
/// windows only, so the machine can never stop for pathology before
/// window + patience epochs. A pathological streak stops the run once it has
/// persisted for `patience` epochs beyond its first detection; hitting
/// max_epochs stops the run with MaxEpochsReached (pathology wins ties).
inline EpochOutcome observe_epoch(SentinelState& st, const LossRecord& rec) {
  if (st.verdict.stopped) return {ObserveStatus::Stop, std::nullopt};
  if (st.current_epoch && rec.epoch <= *st.current_epoch) {
    throw ValidationError("observe_epoch: epoch " + std::to_string(rec.epoch) +
                          " is not after epoch " + std::to_string(*st.current_epoch));
  }
  if (!std::isfinite(rec.g_loss) || !std::isfinite(rec.d_loss)) {
    throw ValidationError("observe_epoch: non-finite loss at epoch " +
                          std::to_string(rec.epoch));
  }
  st.current_epoch = rec.epoch;
  st.recent_g.push_back(rec.g_loss);
  st.recent_d.push_back(rec.d_loss);
  st.recent_epochs.push_back(rec.epoch);
  const auto window = static_cast<std::size_t>(st.cfg.detector.window);
  while (st.recent_g.size() > window) {
    st.recent_g.pop_front();
    st.recent_d.pop_front();
    st.recent_epochs.pop_front();
  }

  EpochOutcome out;
  if (st.recent_g.size() == window) {
    const std::vector<double> g(st.recent_g.begin(), st.recent_g.end());
    const std::vector<double> d(st.recent_d.begin(), st.recent_d.end());
    PathologyEvent ev =
        classify_window(g, d, st.cfg.detector, st.recent_epochs.front(), rec.epoch);
    detail::append_event(st, ev);
    if (is_pathological(ev.kind)) {
      if (!st.streak_start) st.streak_start = rec.epoch;
      st.loss_problem_count = rec.epoch - *st.streak_start + 1;
      if (rec.epoch - *st.streak_start >= st.cfg.patience) {
        detail::mark_stop(st, rec.epoch, StopReason::LossPathologyPersistence);
      }
    } else {
      st.streak_start.reset();
      st.loss_problem_count = 0;
    }
    out.event = std::move(ev);
  }
  if (!st.verdict.stopped && rec.epoch >= st.cfg.max_epochs) {
    detail::mark_stop(st, st.cfg.max_epochs, StopReason::MaxEpochsReached);
  }
  out.status = st.verdict.stopped ? ObserveStatus::Stop : ObserveStatus::Continue;
  return out;
}

/// Resets the best scores (not the best epoch) from freshly recalibrated
/// thresholds, for the resample-per-evaluation mode.
inline void refresh_bests(SentinelState& st, const EffectiveBests& bests) {
  st.best_msssim = bests.best_msssim;
  st.best_fid = bests.best_fid;
}

/// Consumes one metric snapshot. Joint improvement (both scores <= the
/// current bests, ties included) re-anchors the stagnation clock; otherwise
/// the run stops once snap.epoch - best_epoch reaches patience. With the
/// constancy gate enabled, snapshots taken while the loss window is not
/// constant are recorded but have no effect on the decision. A snapshot
/// taken at the max-epochs boundary is still judged (the epoch loop runs
/// its evaluation before the loop bound applies), so stagnation detected
/// exactly at max_epochs wins over MaxEpochsReached.
inline EvalOutcome observe_evaluation(SentinelState& st, const MetricsSnapshot& snap) {
  const bool at_max_boundary = st.verdict.stopped &&
                               st.verdict.reason == StopReason::MaxEpochsReached &&
                               snap.epoch == st.verdict.stop_epoch;
  if (st.verdict.stopped && !at_max_boundary) return {ObserveStatus::Stop, false, false};
  if (snap.epoch <= 0 || snap.epoch % st.cfg.eval_interval != 0) {
    throw ValidationError("observe_evaluation: epoch " + std::to_string(snap.epoch) +
                          " is not a positive multiple of eval_interval " +
                          std::to_string(st.cfg.eval_interval));
  }
  st.snapshots.push_back(snap);

  EvalOutcome out;
  if (st.cfg.gate_on_constancy) {
    const auto window = static_cast<std::size_t>(st.cfg.detector.window);
    bool gate_open = false;
    if (st.recent_g.size() == window) {
      const std::vector<double> g(st.recent_g.begin(), st.recent_g.end());
      const std::vector<double> d(st.recent_d.begin(), st.recent_d.end());
      gate_open = detect_constancy(g, st.cfg.detector).constant &&
                  detect_constancy(d, st.cfg.detector).constant;
    }
    if (!gate_open) {
      out.gated = true;
      return out;
    }
  }

  if (snap.msssim_synth <= st.best_msssim && snap.fid_train_synth <= st.best_fid) {
    st.best_msssim = snap.msssim_synth;
    st.best_fid = snap.fid_train_synth;
    st.best_epoch = snap.epoch;
    st.epochs_since_improvement = 0;
    st.verdict.best_msssim = st.best_msssim;
    st.verdict.best_fid = st.best_fid;
    st.verdict.best_epoch = st.best_epoch;
    out.improved = true;
  } else {
    st.epochs_since_improvement = snap.epoch - st.best_epoch;
    if (st.epochs_since_improvement >= st.cfg.patience) {
      detail::mark_stop(st, snap.epoch, StopReason::MetricStagnation);
    }
  }
  out.status = st.verdict.stopped ? ObserveStatus::Stop : ObserveStatus::Continue;
  return out;
}

/// Current verdict; idempotent.
inline StopDecision decision(const SentinelState& st) { return st.verdict; }

}  // namespace ganwatch
