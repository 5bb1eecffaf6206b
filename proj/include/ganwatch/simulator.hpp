// Copyright 2026 The ganwatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Labeled synthetic training runs: loss trajectories shaped like the four
// canonical regimes (mode collapse, non-convergence, instability, healthy)
// plus scripted metric replays, and blob-mixture image streams whose
// diversity responds to mode count. Everything is a pure function of
// (scenario, seed).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganwatch/error.hpp"
#include "ganwatch/loss_patterns.hpp"
#include "ganwatch/rng.hpp"
#include "ganwatch/telemetry.hpp"

namespace ganwatch {

enum class ScenarioKind { ModeCollapse, NonConvergence, Instability, Healthy, Scripted };

inline std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::ModeCollapse: return "mode-collapse";
    case ScenarioKind::NonConvergence: return "non-convergence";
    case ScenarioKind::Instability: return "instability";
    case ScenarioKind::Healthy: return "healthy";
    case ScenarioKind::Scripted: return "scripted";
  }
  return "healthy";
}

inline ScenarioKind scenario_kind_from_string(std::string_view s) {
  if (s == "mode-collapse") return ScenarioKind::ModeCollapse;
  if (s == "non-convergence") return ScenarioKind::NonConvergence;
  if (s == "instability") return ScenarioKind::Instability;
  if (s == "healthy") return ScenarioKind::Healthy;
  if (s == "scripted") return ScenarioKind::Scripted;
  throw ValidationError("unknown scenario: \"" + std::string(s) + "\"");
}

/// One scripted metric evaluation (bypasses image generation).
struct ScriptEval {
  std::int64_t epoch = 0;
  double msssim = 0.0;
  double fid = 0.0;

  friend bool operator==(const ScriptEval&, const ScriptEval&) = default;
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::Healthy;
  std::int64_t epochs = 1000;
  std::uint64_t seed = 0;
  double noise_sigma = 0.01;

  // Mode collapse: d decays toward d_floor (fully collapsed around
  // collapse_epoch) while g ramps 0 -> g_ramp_high over the first 45% of
  // epochs, then g_ramp_high -> g_final.
  double collapse_epoch = 5.0;
  double d_floor = 0.005;
  double g_ramp_high = 5.0;
  double g_final = 70.0;

  // Non-convergence: a sharp transient over the first transient_frac of
  // epochs, then both series oscillate inside [osc_low, osc_high].
  double transient_frac = 0.25;
  double osc_low = 0.6;
  double osc_high = 0.75;
  double osc_period = 6.0;

  // Instability: flat losses at seed-jittered levels inside these bands.
  double g_band_lo = 0.775, g_band_hi = 0.8;
  double d_band_lo = 0.6, d_band_hi = 0.625;

  // Healthy: both losses settle exponentially from start_level.
  double healthy_g = 1.0;
  double healthy_d = 0.5;
  double start_level = 0.69;

  std::vector<ScriptEval> script;  // Scripted only

  void validate() const {
    if (epochs < 100) throw ValidationError("scenario: epochs must be >= 100");
    if (noise_sigma < 0.0) throw ValidationError("scenario: noise_sigma must be >= 0");
    if (!(osc_low < osc_high) || !(g_band_lo < g_band_hi) || !(d_band_lo < d_band_hi)) {
      throw ValidationError("scenario: band bounds must be ordered");
    }
    if (!(osc_period > 1.0)) throw ValidationError("scenario: osc_period must be > 1");
    if (!(transient_frac > 0.0) || !(transient_frac < 1.0)) {
      throw ValidationError("scenario: transient_frac must be in (0, 1)");
    }
    if (!(collapse_epoch > 0.0)) throw ValidationError("scenario: collapse_epoch must be > 0");
    if (kind == ScenarioKind::Scripted && script.empty()) {
      throw ValidationError("scenario: scripted runs need a non-empty script");
    }
  }
};

namespace detail {

/// Slowly varying observation noise: Gaussian knots every `spacing` epochs,
/// cosine-interpolated. Unlike iid noise, the field moves only a small
/// fraction of sigma within any detector window, so regime shapes stay
/// separable at the default sigma.
class NoiseField {
 public:
  NoiseField(std::uint64_t seed, double sigma, std::int64_t epochs, std::int64_t spacing = 500)
      : spacing_(spacing) {
    Rng rng(seed);
    const auto n_knots = static_cast<std::size_t>(epochs / spacing + 2);
    knots_.reserve(n_knots);
    for (std::size_t i = 0; i < n_knots; ++i) knots_.push_back(sigma * rng.gaussian());
  }

  double at(std::int64_t epoch) const {
    const auto i = static_cast<std::size_t>(epoch / spacing_);
    const double x = static_cast<double>(epoch % spacing_) / static_cast<double>(spacing_);
    const double w = 0.5 * (1.0 - std::cos(std::numbers::pi * x));
    return knots_[i] * (1.0 - w) + knots_[i + 1] * w;
  }

 private:
  std::int64_t spacing_;
  std::vector<double> knots_;
};

inline double lerp_ramp(double from, double to, std::int64_t t, std::int64_t t0,
                        std::int64_t t1) {
  if (t1 <= t0) return to;
  return from + (to - from) * static_cast<double>(t - t0) / static_cast<double>(t1 - t0);
}

}  // namespace detail

/// Generates the scenario's loss trajectory over epochs 1..sc.epochs.
inline LossSeries simulate_losses(const Scenario& sc) {
  sc.validate();
  const detail::NoiseField noise_g(derive_seed(sc.seed, "noise-g"), sc.noise_sigma, sc.epochs);
  const detail::NoiseField noise_d(derive_seed(sc.seed, "noise-d"), sc.noise_sigma, sc.epochs);

  double inst_g_level = 0.0;
  double inst_d_level = 0.0;
  if (sc.kind == ScenarioKind::Instability) {
    // Keep the flat levels away from the band edges so noise cannot leave it.
    Rng rng(derive_seed(sc.seed, "levels"));
    inst_g_level = sc.g_band_lo + (0.25 + 0.5 * rng.uniform()) * (sc.g_band_hi - sc.g_band_lo);
    inst_d_level = sc.d_band_lo + (0.25 + 0.5 * rng.uniform()) * (sc.d_band_hi - sc.d_band_lo);
  }

  const std::int64_t elbow = std::max<std::int64_t>(2, std::llround(0.45 * sc.epochs));
  const std::int64_t transient_end =
      std::max<std::int64_t>(4, std::llround(sc.transient_frac * sc.epochs));
  const std::int64_t transient_half = transient_end / 2;
  const double osc_mid = 0.5 * (sc.osc_low + sc.osc_high);
  const double osc_amp = 0.5 * (sc.osc_high - sc.osc_low);
  const double healthy_tau = 0.05 * static_cast<double>(sc.epochs);
  const double collapse_tau = sc.collapse_epoch / 5.0;

  LossSeries series;
  series.kind = LossKind::BinaryCrossEntropy;
  series.records.reserve(static_cast<std::size_t>(sc.epochs));
  for (std::int64_t t = 1; t <= sc.epochs; ++t) {
    double g = 0.0;
    double d = 0.0;
    switch (sc.kind) {
      case ScenarioKind::ModeCollapse:
        g = t <= elbow ? detail::lerp_ramp(0.0, sc.g_ramp_high, t, 1, elbow)
                       : detail::lerp_ramp(sc.g_ramp_high, sc.g_final, t, elbow, sc.epochs);
        d = sc.d_floor + (0.7 - sc.d_floor) * std::exp(-static_cast<double>(t - 1) / collapse_tau);
        break;
      case ScenarioKind::NonConvergence:
        if (t <= transient_half) {
          g = detail::lerp_ramp(0.7, 6.7, t, 1, transient_half);
          d = detail::lerp_ramp(4.2, 0.25, t, 1, transient_half);
        } else if (t <= transient_end) {
          g = detail::lerp_ramp(6.7, osc_mid, t, transient_half, transient_end);
          d = detail::lerp_ramp(0.25, osc_mid, t, transient_half, transient_end);
        } else {
          const double phase =
              2.0 * std::numbers::pi * static_cast<double>(t - transient_end) / sc.osc_period;
          g = osc_mid + osc_amp * std::sin(phase + 0.5);
          d = osc_mid + osc_amp * std::sin(phase + 2.6);
        }
        break;
      case ScenarioKind::Instability:
        g = inst_g_level;
        d = inst_d_level;
        break;
      case ScenarioKind::Healthy:
      case ScenarioKind::Scripted: {
        const double decay = std::exp(-static_cast<double>(t - 1) / healthy_tau);
        g = sc.healthy_g + (sc.start_level - sc.healthy_g) * decay;
        d = sc.healthy_d + (sc.start_level - sc.healthy_d) * decay;
        break;
      }
    }
    series.records.push_back({t, g + noise_g.at(t), d + noise_d.at(t)});
  }
  return series;
}

/// Ground-truth pathology label for a scenario kind.
inline Pathology truth_label(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::ModeCollapse: return Pathology::ModeCollapse;
    case ScenarioKind::NonConvergence: return Pathology::NonConvergence;
    case ScenarioKind::Instability: return Pathology::Instability;
    case ScenarioKind::Healthy:
    case ScenarioKind::Scripted: return Pathology::Stable;
  }
  return Pathology::Stable;
}

/// The designated steady-state window for ground-truth checks: a window that
/// lies fully inside the scenario's characteristic regime. Returns
/// {start_epoch, end_epoch}, width epochs wide (clipped at the run head).
inline std::pair<std::int64_t, std::int64_t> steady_state_window(const Scenario& sc,
                                                                 std::int64_t width = 50) {
  sc.validate();
  double frac = 1.0;
  switch (sc.kind) {
    case ScenarioKind::ModeCollapse: frac = 0.45; break;
    case ScenarioKind::NonConvergence: frac = 0.75; break;
    case ScenarioKind::Instability: frac = 0.5; break;
    case ScenarioKind::Healthy:
    case ScenarioKind::Scripted: frac = 1.0; break;
  }
  const auto end = static_cast<std::int64_t>(std::llround(frac * sc.epochs));
  return {std::max<std::int64_t>(1, end - width + 1), end};
}

// ---------------------------------------------------------------------------
// Blob-mixture images
// ---------------------------------------------------------------------------

/// A mixture of Gaussian blobs on a grid; mode count controls diversity the
/// way real mode collapse does (one mode = near-duplicate images).
struct ImageDistribution {
  int n_modes = 16;
  int size = 128;
  double blob_radius = 12.0;
  /// Std-dev of per-image positional jitter around the mode center, pixels.
  double center_jitter = 2.0;
  /// Std-dev of additive per-pixel noise.
  double pixel_noise = 0.02;
  double amplitude = 0.9;
  /// Offset applied to every mode center; shifts the whole distribution.
  double center_offset_x = 0.0;
  double center_offset_y = 0.0;

  int grid_side() const {
    return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_modes))));
  }

  std::pair<double, double> mode_center(int mode) const {
    const int g = grid_side();
    const double cell = static_cast<double>(size) / g;
    const double cx = (mode % g + 0.5) * cell + center_offset_x;
    const double cy = (mode / g + 0.5) * cell + center_offset_y;
    return {cx, cy};
  }

  void validate() const {
    if (n_modes < 1) throw ValidationError("image distribution: n_modes must be >= 1");
    if (size < 16) throw ValidationError("image distribution: size must be >= 16");
    if (!(blob_radius > 0.0)) throw ValidationError("image distribution: blob_radius must be > 0");
    if (center_jitter < 0.0 || pixel_noise < 0.0) {
      throw ValidationError("image distribution: noise levels must be >= 0");
    }
    if (!(amplitude > 0.0)) throw ValidationError("image distribution: amplitude must be > 0");
    for (int m = 0; m < n_modes; ++m) {
      const auto [cx, cy] = mode_center(m);
      if (cx < 0.0 || cx >= size || cy < 0.0 || cy >= size) {
        throw ValidationError("image distribution: mode " + std::to_string(m) +
                              " center lies outside the raster");
      }
    }
  }
};

/// Draws n images: each places one blob at a jittered mode center with
/// additive pixel noise, clamped to [0, 1].
inline ImageSet simulate_images(const ImageDistribution& dist, int n, std::uint64_t seed) {
  dist.validate();
  if (n < 1) throw std::invalid_argument("simulate_images: n must be >= 1");
  Rng rng(derive_seed(seed, "images"));
  std::vector<Image> images;
  images.reserve(static_cast<std::size_t>(n));
  const double inv_2r2 = 1.0 / (2.0 * dist.blob_radius * dist.blob_radius);
  for (int i = 0; i < n; ++i) {
    const auto mode = static_cast<int>(rng.below(static_cast<std::uint64_t>(dist.n_modes)));
    const auto [mx, my] = dist.mode_center(mode);
    const double cx = mx + dist.center_jitter * rng.gaussian();
    const double cy = my + dist.center_jitter * rng.gaussian();
    Image img;
    img.height = dist.size;
    img.width = dist.size;
    img.px.resize(static_cast<std::size_t>(dist.size) * dist.size);
    for (int y = 0; y < dist.size; ++y) {
      for (int x = 0; x < dist.size; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        double v = dist.amplitude * std::exp(-d2 * inv_2r2);
        if (dist.pixel_noise > 0.0) v += dist.pixel_noise * rng.gaussian();
        img.px[static_cast<std::size_t>(y) * dist.size + x] = std::clamp(v, 0.0, 1.0);
      }
    }
    images.push_back(std::move(img));
  }
  return make_image_set(std::move(images));
}

/// Image distribution a scenario's generator would emit: single-mode for
/// mode collapse, diverse for everything else.
inline ImageDistribution default_distribution(ScenarioKind kind) {
  ImageDistribution d;
  d.n_modes = kind == ScenarioKind::ModeCollapse ? 1 : 16;
  return d;
}

// ---------------------------------------------------------------------------
// Run bundles
// ---------------------------------------------------------------------------

/// Ground-truth regime for a span of epochs.
struct LabelWindow {
  std::int64_t epoch_start = 0;
  std::int64_t epoch_end = 0;
  Pathology label = Pathology::Stable;

  friend bool operator==(const LabelWindow&, const LabelWindow&) = default;
};

struct RunBundle {
  Scenario scenario;
  LossSeries losses;
  /// Scripted per-evaluation metric values (empty unless Scripted).
  std::vector<ScriptEval> scripted_metrics;
  /// Per-evaluation synthetic image sets (empty unless images requested).
  std::vector<std::pair<std::int64_t, ImageSet>> snapshots;
  std::vector<LabelWindow> labels;
};

namespace detail {

inline std::vector<LabelWindow> scenario_labels(const Scenario& sc) {
  std::vector<LabelWindow> labels;
  if (sc.kind == ScenarioKind::NonConvergence) {
    const std::int64_t transient_end =
        std::max<std::int64_t>(4, std::llround(sc.transient_frac * sc.epochs));
    labels.push_back({1, transient_end, Pathology::ModeCollapse});
    labels.push_back({transient_end + 1, sc.epochs, Pathology::NonConvergence});
  } else {
    labels.push_back({1, sc.epochs, truth_label(sc.kind)});
  }
  return labels;
}

}  // namespace detail

/// Generates a full run: losses, ground-truth labels, and (optionally) one
/// synthetic image set per evaluation epoch. Scripted scenarios carry their
/// metric values instead of images and use the healthy loss shape so no
/// pathology interferes with the scripted stop arithmetic.
inline RunBundle simulate_run(const Scenario& sc, std::int64_t eval_interval = 50,
                              int images_per_snapshot = 0,
                              std::optional<ImageDistribution> dist = std::nullopt) {
  sc.validate();
  if (eval_interval < 1) throw ValidationError("simulate_run: eval_interval must be >= 1");
  RunBundle run;
  run.scenario = sc;
  run.losses = simulate_losses(sc);
  run.labels = detail::scenario_labels(sc);
  if (sc.kind == ScenarioKind::Scripted) {
    for (const ScriptEval& ev : sc.script) {
      if (ev.epoch <= 0 || ev.epoch % eval_interval != 0 || ev.epoch > sc.epochs) {
        throw ValidationError("scripted run: eval epoch " + std::to_string(ev.epoch) +
                              " is not an in-range multiple of " +
                              std::to_string(eval_interval));
      }
      if (!run.scripted_metrics.empty() && ev.epoch <= run.scripted_metrics.back().epoch) {
        throw ValidationError("scripted run: eval epochs must be strictly increasing");
      }
      if (!std::isfinite(ev.msssim) || !std::isfinite(ev.fid)) {
        throw ValidationError("scripted run: non-finite metric value at epoch " +
                              std::to_string(ev.epoch));
      }
      run.scripted_metrics.push_back(ev);
    }
  } else if (images_per_snapshot > 0) {
    const ImageDistribution d = dist.value_or(default_distribution(sc.kind));
    for (std::int64_t e = eval_interval; e <= sc.epochs; e += eval_interval) {
      run.snapshots.emplace_back(
          e, simulate_images(d, images_per_snapshot,
                             derive_seed(sc.seed, "snap-" + std::to_string(e))));
    }
  }
  return run;
}

/// Convenience wrapper for metric replays.
inline RunBundle scripted_run(std::vector<ScriptEval> script, std::int64_t epochs,
                              std::uint64_t seed, std::int64_t eval_interval = 50) {
  Scenario sc;
  sc.kind = ScenarioKind::Scripted;
  sc.epochs = epochs;
  sc.seed = seed;
  sc.script = std::move(script);
  return simulate_run(sc, eval_interval);
}

// ---------------------------------------------------------------------------
// File emission and loading
// ---------------------------------------------------------------------------

inline constexpr std::string_view kLabelsSchema = "ganwatch-labels-v1";
inline constexpr std::string_view kMetricScriptSchema = "ganwatch-metrics-v1";

/// Writes the scripted metric values consumed by `monitor --metrics-file`.
inline void save_metric_script(const std::vector<ScriptEval>& evals,
                               const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["schema"] = kMetricScriptSchema;
  j["evals"] = nlohmann::ordered_json::array();
  for (const ScriptEval& ev : evals) {
    j["evals"].push_back({{"epoch", ev.epoch}, {"msssim", ev.msssim}, {"fid", ev.fid}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write metrics file: " + path.string());
  out << j.dump(2) << '\n';
}

inline std::vector<ScriptEval> load_metric_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open metrics file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("metrics file " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != kMetricScriptSchema) {
      throw ValidationError("metrics file: unexpected schema");
    }
    std::vector<ScriptEval> evals;
    for (const auto& je : j.at("evals")) {
      ScriptEval ev;
      ev.epoch = je.at("epoch").get<std::int64_t>();
      ev.msssim = je.at("msssim").get<double>();
      ev.fid = je.at("fid").get<double>();
      if (!evals.empty() && ev.epoch <= evals.back().epoch) {
        throw ValidationError("metrics file: eval epochs must be strictly increasing");
      }
      evals.push_back(ev);
    }
    return evals;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("metrics file " + path.string() + ": " + e.what());
  }
}

/// Writes a run to disk in the telemetry formats: loss.jsonl, labels.json,
/// metrics.json (scripted runs), and snapshots/epoch_<N>/*.pgm.
inline void emit_run(const RunBundle& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "loss.jsonl", std::ios::binary);
    if (!out) throw Error("cannot write loss log: " + (dir / "loss.jsonl").string());
    for (const LossRecord& rec : run.losses.records) {
      nlohmann::ordered_json j;
      j["epoch"] = rec.epoch;
      j["g_loss"] = rec.g_loss;
      j["d_loss"] = rec.d_loss;
      out << j.dump() << '\n';
    }
  }
  {
    nlohmann::ordered_json j;
    j["schema"] = kLabelsSchema;
    j["scenario"] = std::string(to_string(run.scenario.kind));
    j["epochs"] = run.scenario.epochs;
    j["seed"] = run.scenario.seed;
    j["windows"] = nlohmann::ordered_json::array();
    for (const LabelWindow& w : run.labels) {
      j["windows"].push_back({{"epoch_start", w.epoch_start},
                              {"epoch_end", w.epoch_end},
                              {"label", std::string(to_string(w.label))}});
    }
    std::ofstream out(dir / "labels.json", std::ios::binary);
    if (!out) throw Error("cannot write labels file: " + (dir / "labels.json").string());
    out << j.dump(2) << '\n';
  }
  if (!run.scripted_metrics.empty()) {
    save_metric_script(run.scripted_metrics, dir / "metrics.json");
  }
  for (const auto& [epoch, set] : run.snapshots) {
    const std::filesystem::path snap_dir =
        dir / "snapshots" / ("epoch_" + std::to_string(epoch));
    std::filesystem::create_directories(snap_dir);
    for (std::size_t i = 0; i < set.size(); ++i) {
      std::string name = std::to_string(i);
      name.insert(0, name.size() < 3 ? 3 - name.size() : 0, '0');
      write_pgm(snap_dir / ("img_" + name + ".pgm"), set.images[i]);
    }
  }
}

}  // namespace ganwatch
