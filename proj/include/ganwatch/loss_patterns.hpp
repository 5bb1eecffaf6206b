// Copyright 2026 The ganwatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Loss-trajectory pathology detectors. All detectors are pure functions of a
// window of ordered loss values plus a DetectorConfig; the classifier combines
// them with a fixed precedence into one label per window.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ganwatch/error.hpp"

namespace ganwatch {

struct DetectorConfig {
  /// Trailing window length, in epochs.
  int window = 50;
  /// Constancy: a window is constant when (max - min) <= max(const_abs_eps,
  /// const_rel_eps * |mean|).
  double const_rel_eps = 0.02;
  double const_abs_eps = 0.01;
  /// Largest single-epoch jump tolerated before a window counts as unstable.
  double jump_threshold = 0.5;
  /// Least-squares slope magnitude (per epoch) flagged as a sharp change.
  double slope_threshold = 0.02;
  /// Oscillation: minimum detrended zero-crossing rate (crossings per epoch)
  /// and minimum residual amplitude.
  double osc_min_crossings = 0.3;
  double osc_min_amp = 0.02;
  /// Discriminator mean below this counts as collapsed to zero.
  double d_zero_eps = 0.05;
  /// Relative tolerance on the healthy g ~= 2*d loss relationship.
  double healthy_ratio_tol = 0.2;

  void validate() const {
    if (window < 5) throw std::invalid_argument("DetectorConfig: window must be >= 5");
    const double thresholds[] = {const_rel_eps,     const_abs_eps, jump_threshold,
                                 slope_threshold,   osc_min_crossings, osc_min_amp,
                                 d_zero_eps,        healthy_ratio_tol};
    for (double t : thresholds) {
      if (!(t > 0.0) || !std::isfinite(t)) {
        throw std::invalid_argument("DetectorConfig: thresholds must be strictly positive");
      }
    }
  }
};

/// Serializes as flat `key = value` lines (the same shape the CLI accepts as
/// a config file).
inline std::string to_kv_string(const DetectorConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "window = " << cfg.window << "\n"
      << "const-rel-eps = " << cfg.const_rel_eps << "\n"
      << "const-abs-eps = " << cfg.const_abs_eps << "\n"
      << "jump-threshold = " << cfg.jump_threshold << "\n"
      << "slope-threshold = " << cfg.slope_threshold << "\n"
      << "osc-min-crossings = " << cfg.osc_min_crossings << "\n"
      << "osc-min-amp = " << cfg.osc_min_amp << "\n"
      << "d-zero-eps = " << cfg.d_zero_eps << "\n"
      << "healthy-ratio-tol = " << cfg.healthy_ratio_tol << "\n";
  return out.str();
}

inline DetectorConfig detector_config_from_kv(std::string_view text) {
  DetectorConfig cfg;
  std::map<std::string, double*> fields = {
      {"const-rel-eps", &cfg.const_rel_eps},
      {"const-abs-eps", &cfg.const_abs_eps},
      {"jump-threshold", &cfg.jump_threshold},
      {"slope-threshold", &cfg.slope_threshold},
      {"osc-min-crossings", &cfg.osc_min_crossings},
      {"osc-min-amp", &cfg.osc_min_amp},
      {"d-zero-eps", &cfg.d_zero_eps},
      {"healthy-ratio-tol", &cfg.healthy_ratio_tol},
  };
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string key, eq;
    double value = 0.0;
    if (!(ls >> key)) continue;  // blank line
    if (!(ls >> eq) || eq != "=" || !(ls >> value)) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected `key = value`");
    }
    if (key == "window") {
      cfg.window = static_cast<int>(value);
    } else if (auto it = fields.find(key); it != fields.end()) {
      *it->second = value;
    } else {
      throw ParseError("config line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
    }
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Detectors
// ---------------------------------------------------------------------------

struct ConstancyResult {
  bool constant = false;
  double range = 0.0;
  double mean = 0.0;
};

inline ConstancyResult detect_constancy(std::span<const double> series,
                                        const DetectorConfig& cfg) {
  if (series.size() < 2) {
    throw std::invalid_argument("detect_constancy: need at least 2 values");
  }
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  double sum = 0.0;
  for (double v : series) sum += v;
  ConstancyResult r;
  r.range = *hi - *lo;
  r.mean = sum / static_cast<double>(series.size());
  r.constant = r.range <= std::max(cfg.const_abs_eps, cfg.const_rel_eps * std::abs(r.mean));
  return r;
}

enum class TrendDirection { Increase, Decrease, None };

inline std::string_view to_string(TrendDirection d) {
  switch (d) {
    case TrendDirection::Increase: return "increase";
    case TrendDirection::Decrease: return "decrease";
    case TrendDirection::None: return "none";
  }
  return "none";
}

struct SharpChangeResult {
  TrendDirection direction = TrendDirection::None;
  /// Least-squares slope per epoch.
  double slope = 0.0;
  /// Largest absolute change between consecutive epochs.
  double max_jump = 0.0;
};

inline SharpChangeResult detect_sharp_change(std::span<const double> series,
                                             const DetectorConfig& cfg) {
  if (series.size() < 2) {
    throw std::invalid_argument("detect_sharp_change: need at least 2 values");
  }
  const std::size_t n = series.size();
  double mean_x = 0.0;
  for (double v : series) mean_x += v;
  mean_x /= static_cast<double>(n);
  const double mean_t = (static_cast<double>(n) - 1.0) / 2.0;
  double cov = 0.0;
  double var_t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = static_cast<double>(i) - mean_t;
    cov += dt * (series[i] - mean_x);
    var_t += dt * dt;
  }
  SharpChangeResult r;
  r.slope = cov / var_t;
  for (std::size_t i = 1; i < n; ++i) {
    r.max_jump = std::max(r.max_jump, std::abs(series[i] - series[i - 1]));
  }
  if (r.slope >= cfg.slope_threshold) {
    r.direction = TrendDirection::Increase;
  } else if (r.slope <= -cfg.slope_threshold) {
    r.direction = TrendDirection::Decrease;
  }
  return r;
}

struct OscillationResult {
  bool oscillating = false;
  /// Zero crossings of the detrended residual per epoch.
  double crossing_rate = 0.0;
  /// Peak-to-peak amplitude of the residual.
  double amplitude = 0.0;
};

namespace detail {

/// Residual after subtracting a centered moving average (span = window/5,
/// truncated at the edges).
inline std::vector<double> detrend(std::span<const double> series, int window) {
  const int h = std::max(1, window / 10);  // half-span
  const int n = static_cast<int>(series.size());
  std::vector<double> residual(series.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - h);
    const int hi = std::min(n - 1, i + h);
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) sum += series[j];
    residual[i] = series[i] - sum / static_cast<double>(hi - lo + 1);
  }
  return residual;
}

/// Sign changes of the residual, with a dead band of 2.5% of the peak-to-peak
/// amplitude so float-level jitter on smooth inputs does not register.
inline int count_crossings(const std::vector<double>& residual, double amplitude) {
  const double dead_band = 0.025 * amplitude;
  int crossings = 0;
  int last_sign = 0;
  for (double r : residual) {
    const int sign = r > dead_band ? 1 : (r < -dead_band ? -1 : 0);
    if (sign != 0) {
      if (last_sign != 0 && sign != last_sign) ++crossings;
      last_sign = sign;
    }
  }
  return crossings;
}

}  // namespace detail

inline OscillationResult detect_oscillation(std::span<const double> series,
                                            const DetectorConfig& cfg) {
  if (series.size() < static_cast<std::size_t>(cfg.window)) {
    throw std::invalid_argument("detect_oscillation: need at least cfg.window values");
  }
  const std::vector<double> residual = detail::detrend(series, cfg.window);
  const auto [lo, hi] = std::minmax_element(residual.begin(), residual.end());
  OscillationResult r;
  r.amplitude = *hi - *lo;
  r.crossing_rate = static_cast<double>(detail::count_crossings(residual, r.amplitude)) /
                    static_cast<double>(series.size() - 1);
  // The not-constant guard uses the absolute epsilon only: the relative term
  // depends on |mean| and would break shift invariance.
  const auto [rlo, rhi] = std::minmax_element(series.begin(), series.end());
  const bool raw_constant = (*rhi - *rlo) <= cfg.const_abs_eps;
  r.oscillating = r.crossing_rate >= cfg.osc_min_crossings &&
                  r.amplitude >= cfg.osc_min_amp && !raw_constant;
  return r;
}

// ---------------------------------------------------------------------------
// Window classification
// ---------------------------------------------------------------------------

enum class Pathology { ModeCollapse, NonConvergence, Instability, Stable, Indeterminate };

inline std::string_view to_string(Pathology p) {
  switch (p) {
    case Pathology::ModeCollapse: return "mode-collapse";
    case Pathology::NonConvergence: return "non-convergence";
    case Pathology::Instability: return "instability";
    case Pathology::Stable: return "stable";
    case Pathology::Indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

inline Pathology pathology_from_string(std::string_view s) {
  if (s == "mode-collapse") return Pathology::ModeCollapse;
  if (s == "non-convergence") return Pathology::NonConvergence;
  if (s == "instability") return Pathology::Instability;
  if (s == "stable") return Pathology::Stable;
  if (s == "indeterminate") return Pathology::Indeterminate;
  throw ValidationError("unknown pathology label: \"" + std::string(s) + "\"");
}

inline bool is_pathological(Pathology p) {
  return p == Pathology::ModeCollapse || p == Pathology::NonConvergence ||
         p == Pathology::Instability;
}

/// Detector readings backing a classification, kept for reports.
struct WindowEvidence {
  double g_mean = 0.0, d_mean = 0.0;
  double g_range = 0.0, d_range = 0.0;
  double g_slope = 0.0, d_slope = 0.0;
  double g_max_jump = 0.0, d_max_jump = 0.0;
  double g_crossing_rate = 0.0, d_crossing_rate = 0.0;
  double g_osc_amplitude = 0.0, d_osc_amplitude = 0.0;
};

struct PathologyEvent {
  Pathology kind = Pathology::Indeterminate;
  std::int64_t epoch_start = 0;
  std::int64_t epoch_end = 0;
  WindowEvidence evidence;
};

/// Labels one window of paired g/d losses. Precedence:
///   1. ModeCollapse   — d collapsed to ~0 while g is not decreasing
///   2. ModeCollapse   — g rising sharply while d falls sharply
///   3. NonConvergence — both series oscillate
///   4. Stable         — both constant with g ~= 2*d
///   5. Instability    — abrupt jumps, or both constant but off-ratio
///   6. Indeterminate
/// Windows shorter than 5 epochs are always Indeterminate; the oscillation
/// rule needs a full cfg.window of history and is skipped below that.
inline PathologyEvent classify_window(std::span<const double> g, std::span<const double> d,
                                      const DetectorConfig& cfg, std::int64_t epoch_start = 0,
                                      std::int64_t epoch_end = 0) {
  if (g.size() != d.size()) {
    throw std::invalid_argument("classify_window: g and d must have the same length");
  }
  if (g.empty()) {
    throw std::invalid_argument("classify_window: empty window");
  }
  for (double v : g) {
    if (!std::isfinite(v)) throw ValidationError("classify_window: non-finite g value");
  }
  for (double v : d) {
    if (!std::isfinite(v)) throw ValidationError("classify_window: non-finite d value");
  }
  PathologyEvent ev;
  ev.epoch_start = epoch_start;
  ev.epoch_end = epoch_end == 0 ? epoch_start + static_cast<std::int64_t>(g.size()) - 1
                                : epoch_end;
  if (g.size() < 5) {
    double gs = 0.0, ds = 0.0;
    for (double v : g) gs += v;
    for (double v : d) ds += v;
    ev.evidence.g_mean = gs / static_cast<double>(g.size());
    ev.evidence.d_mean = ds / static_cast<double>(d.size());
    ev.kind = Pathology::Indeterminate;
    return ev;
  }

  const ConstancyResult g_const = detect_constancy(g, cfg);
  const ConstancyResult d_const = detect_constancy(d, cfg);
  const SharpChangeResult g_change = detect_sharp_change(g, cfg);
  const SharpChangeResult d_change = detect_sharp_change(d, cfg);
  OscillationResult g_osc, d_osc;
  if (g.size() >= static_cast<std::size_t>(cfg.window)) {
    g_osc = detect_oscillation(g, cfg);
    d_osc = detect_oscillation(d, cfg);
  }

  ev.evidence.g_mean = g_const.mean;
  ev.evidence.d_mean = d_const.mean;
  ev.evidence.g_range = g_const.range;
  ev.evidence.d_range = d_const.range;
  ev.evidence.g_slope = g_change.slope;
  ev.evidence.d_slope = d_change.slope;
  ev.evidence.g_max_jump = g_change.max_jump;
  ev.evidence.d_max_jump = d_change.max_jump;
  ev.evidence.g_crossing_rate = g_osc.crossing_rate;
  ev.evidence.d_crossing_rate = d_osc.crossing_rate;
  ev.evidence.g_osc_amplitude = g_osc.amplitude;
  ev.evidence.d_osc_amplitude = d_osc.amplitude;

  const bool g_nondecreasing = g_change.direction == TrendDirection::Increase ||
                               g_const.constant || g_change.slope >= 0.0;
  if (d_const.mean < cfg.d_zero_eps && g_nondecreasing) {
    ev.kind = Pathology::ModeCollapse;
  } else if (g_change.direction == TrendDirection::Increase &&
             d_change.direction == TrendDirection::Decrease) {
    ev.kind = Pathology::ModeCollapse;
  } else if (g_osc.oscillating && d_osc.oscillating) {
    ev.kind = Pathology::NonConvergence;
  } else if (g_const.constant && d_const.constant &&
             std::abs(g_const.mean - 2.0 * d_const.mean) <=
                 cfg.healthy_ratio_tol * std::abs(g_const.mean)) {
    ev.kind = Pathology::Stable;
  } else if (g_change.max_jump >= cfg.jump_threshold ||
             d_change.max_jump >= cfg.jump_threshold ||
             (g_const.constant && d_const.constant)) {
    ev.kind = Pathology::Instability;
  } else {
    ev.kind = Pathology::Indeterminate;
  }
  return ev;
}

/// True when the window shows any training pathology.
inline bool analyze_loss_patterns(std::span<const double> g, std::span<const double> d,
                                  const DetectorConfig& cfg) {
  return is_pathological(classify_window(g, d, cfg).kind);
}

}  // namespace ganwatch
