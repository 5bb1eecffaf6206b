// Copyright 2026 The ganwatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run reports: the machine-readable record of one monitoring run — decision,
// thresholds, snapshots, pathology timeline, config echo, and input digests.
// Reports are deterministic (no timestamps) so identical runs produce
// byte-identical files.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganwatch/calibration.hpp"
#include "ganwatch/error.hpp"
#include "ganwatch/loss_patterns.hpp"
#include "ganwatch/metrics.hpp"
#include "ganwatch/sentinel.hpp"

namespace ganwatch {

inline constexpr std::string_view kToolName = "ganwatch";
inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kReportSchema = "ganwatch-report-v1";

// ---------------------------------------------------------------------------
// Input digests
// ---------------------------------------------------------------------------

/// FNV-1a 64-bit over a byte string, as a fixed-width hex string.
inline std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string hex(16, '0');
  for (int i = 15; i >= 0; --i) {
    hex[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return hex;
}

inline std::string fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open input for digest: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a64_hex(buf.str());
}

struct InputDigest {
  std::string path;
  std::string fnv1a64;

  friend bool operator==(const InputDigest&, const InputDigest&) = default;
};

// ---------------------------------------------------------------------------
// Report structure
// ---------------------------------------------------------------------------

struct RunReport {
  SentinelConfig config;
  Thresholds thresholds;
  std::vector<InputDigest> inputs;
  StopDecision decision;
  std::vector<MetricsSnapshot> snapshots;
  std::vector<PathologyEvent> events;
};

/// Snapshot of a finished (or stopped) sentinel as a report.
inline RunReport make_report(const SentinelState& st, std::vector<InputDigest> inputs = {}) {
  RunReport rep;
  rep.config = st.cfg;
  rep.thresholds = st.thresholds;
  rep.inputs = std::move(inputs);
  rep.decision = decision(st);
  rep.snapshots = st.snapshots;
  rep.events = st.events;
  return rep;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json detector_config_to_json(const DetectorConfig& d) {
  nlohmann::ordered_json j;
  j["window"] = d.window;
  j["const_rel_eps"] = d.const_rel_eps;
  j["const_abs_eps"] = d.const_abs_eps;
  j["jump_threshold"] = d.jump_threshold;
  j["slope_threshold"] = d.slope_threshold;
  j["osc_min_crossings"] = d.osc_min_crossings;
  j["osc_min_amp"] = d.osc_min_amp;
  j["d_zero_eps"] = d.d_zero_eps;
  j["healthy_ratio_tol"] = d.healthy_ratio_tol;
  return j;
}

inline DetectorConfig detector_config_from_json(const nlohmann::json& j) {
  DetectorConfig d;
  d.window = j.at("window").get<int>();
  d.const_rel_eps = j.at("const_rel_eps").get<double>();
  d.const_abs_eps = j.at("const_abs_eps").get<double>();
  d.jump_threshold = j.at("jump_threshold").get<double>();
  d.slope_threshold = j.at("slope_threshold").get<double>();
  d.osc_min_crossings = j.at("osc_min_crossings").get<double>();
  d.osc_min_amp = j.at("osc_min_amp").get<double>();
  d.d_zero_eps = j.at("d_zero_eps").get<double>();
  d.healthy_ratio_tol = j.at("healthy_ratio_tol").get<double>();
  d.validate();
  return d;
}

inline nlohmann::ordered_json sentinel_config_to_json(const SentinelConfig& c) {
  nlohmann::ordered_json j;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["eval_interval"] = c.eval_interval;
  j["gate_on_constancy"] = c.gate_on_constancy;
  j["metrics_enabled"] = c.metrics_enabled;
  j["threshold_mode"] = std::string(to_string(c.threshold_mode));
  j["detector"] = detector_config_to_json(c.detector);
  return j;
}

inline SentinelConfig sentinel_config_from_json(const nlohmann::json& j) {
  SentinelConfig c;
  c.max_epochs = j.at("max_epochs").get<std::int64_t>();
  c.patience = j.at("patience").get<std::int64_t>();
  c.eval_interval = j.at("eval_interval").get<std::int64_t>();
  c.gate_on_constancy = j.at("gate_on_constancy").get<bool>();
  c.metrics_enabled = j.at("metrics_enabled").get<bool>();
  c.threshold_mode = threshold_mode_from_string(j.at("threshold_mode").get<std::string>());
  c.detector = detector_config_from_json(j.at("detector"));
  c.validate();
  return c;
}

inline nlohmann::ordered_json snapshot_to_json(const MetricsSnapshot& s) {
  nlohmann::ordered_json j;
  j["epoch"] = s.epoch;
  j["msssim_synth"] = s.msssim_synth;
  j["fid_train_synth"] = s.fid_train_synth;
  j["sample_seed"] = s.sample_seed;
  j["n_pairs"] = s.n_pairs;
  j["n_samples"] = s.n_samples;
  return j;
}

inline MetricsSnapshot snapshot_from_json(const nlohmann::json& j) {
  MetricsSnapshot s;
  s.epoch = j.at("epoch").get<std::int64_t>();
  s.msssim_synth = j.at("msssim_synth").get<double>();
  s.fid_train_synth = j.at("fid_train_synth").get<double>();
  s.sample_seed = j.at("sample_seed").get<std::uint64_t>();
  s.n_pairs = j.at("n_pairs").get<int>();
  s.n_samples = j.at("n_samples").get<int>();
  return s;
}

inline nlohmann::ordered_json event_to_json(const PathologyEvent& e) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(e.kind));
  j["epoch_start"] = e.epoch_start;
  j["epoch_end"] = e.epoch_end;
  j["evidence"] = {{"g_mean", e.evidence.g_mean},
                   {"d_mean", e.evidence.d_mean},
                   {"g_range", e.evidence.g_range},
                   {"d_range", e.evidence.d_range},
                   {"g_slope", e.evidence.g_slope},
                   {"d_slope", e.evidence.d_slope},
                   {"g_max_jump", e.evidence.g_max_jump},
                   {"d_max_jump", e.evidence.d_max_jump},
                   {"g_crossing_rate", e.evidence.g_crossing_rate},
                   {"d_crossing_rate", e.evidence.d_crossing_rate},
                   {"g_osc_amplitude", e.evidence.g_osc_amplitude},
                   {"d_osc_amplitude", e.evidence.d_osc_amplitude}};
  return j;
}

inline PathologyEvent event_from_json(const nlohmann::json& j) {
  PathologyEvent e;
  e.kind = pathology_from_string(j.at("kind").get<std::string>());
  e.epoch_start = j.at("epoch_start").get<std::int64_t>();
  e.epoch_end = j.at("epoch_end").get<std::int64_t>();
  const auto& v = j.at("evidence");
  e.evidence.g_mean = v.at("g_mean").get<double>();
  e.evidence.d_mean = v.at("d_mean").get<double>();
  e.evidence.g_range = v.at("g_range").get<double>();
  e.evidence.d_range = v.at("d_range").get<double>();
  e.evidence.g_slope = v.at("g_slope").get<double>();
  e.evidence.d_slope = v.at("d_slope").get<double>();
  e.evidence.g_max_jump = v.at("g_max_jump").get<double>();
  e.evidence.d_max_jump = v.at("d_max_jump").get<double>();
  e.evidence.g_crossing_rate = v.at("g_crossing_rate").get<double>();
  e.evidence.d_crossing_rate = v.at("d_crossing_rate").get<double>();
  e.evidence.g_osc_amplitude = v.at("g_osc_amplitude").get<double>();
  e.evidence.d_osc_amplitude = v.at("d_osc_amplitude").get<double>();
  return e;
}

inline nlohmann::ordered_json decision_to_json(const StopDecision& d) {
  nlohmann::ordered_json j;
  j["stopped"] = d.stopped;
  j["stop_epoch"] = d.stop_epoch;
  j["reason"] = std::string(to_string(d.reason));
  j["best_msssim"] = d.best_msssim;
  j["best_fid"] = d.best_fid;
  j["best_epoch"] = d.best_epoch;
  return j;
}

inline StopDecision decision_from_json(const nlohmann::json& j) {
  StopDecision d;
  d.stopped = j.at("stopped").get<bool>();
  d.stop_epoch = j.at("stop_epoch").get<std::int64_t>();
  d.reason = stop_reason_from_string(j.at("reason").get<std::string>());
  d.best_msssim = j.at("best_msssim").get<double>();
  d.best_fid = j.at("best_fid").get<double>();
  d.best_epoch = j.at("best_epoch").get<std::int64_t>();
  return d;
}

inline nlohmann::ordered_json report_to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["tool"] = {{"name", std::string(kToolName)}, {"version", std::string(kToolVersion)}};
  j["config"] = sentinel_config_to_json(r.config);
  j["thresholds"] = thresholds_to_json(r.thresholds);
  j["inputs"] = nlohmann::ordered_json::array();
  for (const InputDigest& in : r.inputs) {
    j["inputs"].push_back({{"path", in.path}, {"fnv1a64", in.fnv1a64}});
  }
  j["decision"] = decision_to_json(r.decision);
  j["snapshots"] = nlohmann::ordered_json::array();
  for (const MetricsSnapshot& s : r.snapshots) j["snapshots"].push_back(snapshot_to_json(s));
  j["events"] = nlohmann::ordered_json::array();
  for (const PathologyEvent& e : r.events) j["events"].push_back(event_to_json(e));
  return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kReportSchema) {
      throw ValidationError("report: unexpected schema \"" +
                            j.at("schema").get<std::string>() + "\"");
    }
    RunReport r;
    r.config = sentinel_config_from_json(j.at("config"));
    r.thresholds = thresholds_from_json(j.at("thresholds"));
    for (const auto& in : j.at("inputs")) {
      r.inputs.push_back(
          {in.at("path").get<std::string>(), in.at("fnv1a64").get<std::string>()});
    }
    r.decision = decision_from_json(j.at("decision"));
    for (const auto& s : j.at("snapshots")) r.snapshots.push_back(snapshot_from_json(s));
    for (const auto& e : j.at("events")) r.events.push_back(event_from_json(e));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report: ") + e.what());
  }
}

inline void save_report(const RunReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report: " + path.string());
  out << report_to_json(r).dump(2) << '\n';
}

inline RunReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open report: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("report " + path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

// ---------------------------------------------------------------------------
// Human-readable renderings
// ---------------------------------------------------------------------------

inline std::string render_report_text(const RunReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << kToolName << " " << kToolVersion << " run report\n\n";
  out << "Decision: " << (r.decision.stopped ? "STOP" : "continue") << " ("
      << to_string(r.decision.reason) << ")\n";
  out << "  stop epoch:  " << r.decision.stop_epoch << "\n";
  out << "  best epoch:  " << r.decision.best_epoch << "\n";
  out << "  best MS-SSIM: " << r.decision.best_msssim << "\n";
  out << "  best FID:     " << r.decision.best_fid << "\n\n";
  out << "Config: max_epochs=" << r.config.max_epochs << " patience=" << r.config.patience
      << " eval_interval=" << r.config.eval_interval
      << " threshold_mode=" << to_string(r.config.threshold_mode)
      << " gate_on_constancy=" << (r.config.gate_on_constancy ? "true" : "false") << "\n";
  out << "Thresholds: msssim_th1=" << r.thresholds.msssim_th1
      << " msssim_th2=" << r.thresholds.msssim_th2 << " fid_th1=" << r.thresholds.fid_th1
      << " fid_th2=" << r.thresholds.fid_th2 << " (seed " << r.thresholds.seed << ")\n\n";
  out << "Pathology timeline (" << r.events.size() << " segments):\n";
  for (const PathologyEvent& e : r.events) {
    out << "  [" << e.epoch_start << ", " << e.epoch_end << "]  " << to_string(e.kind)
        << "  (g_mean=" << e.evidence.g_mean << ", d_mean=" << e.evidence.d_mean
        << ", g_slope=" << e.evidence.g_slope << ")\n";
  }
  out << "\nMetric snapshots (" << r.snapshots.size() << "):\n";
  for (const MetricsSnapshot& s : r.snapshots) {
    out << "  epoch " << s.epoch << ": msssim=" << s.msssim_synth
        << " fid=" << s.fid_train_synth << "\n";
  }
  if (!r.inputs.empty()) {
    out << "\nInputs:\n";
    for (const InputDigest& in : r.inputs) {
      out << "  " << in.path << "  fnv1a64:" << in.fnv1a64 << "\n";
    }
  }
  return out.str();
}

/// Plot-friendly CSV: one row per metric snapshot.
inline std::string render_report_csv(const RunReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,msssim_synth,fid_train_synth,improved_best_epoch\n";
  std::int64_t best = 0;
  double best_ms = effective_bests(r.thresholds, r.config.threshold_mode).best_msssim;
  double best_fid = effective_bests(r.thresholds, r.config.threshold_mode).best_fid;
  for (const MetricsSnapshot& s : r.snapshots) {
    if (s.msssim_synth <= best_ms && s.fid_train_synth <= best_fid) {
      best_ms = s.msssim_synth;
      best_fid = s.fid_train_synth;
      best = s.epoch;
    }
    out << s.epoch << ',' << s.msssim_synth << ',' << s.fid_train_synth << ',' << best << "\n";
  }
  return out.str();
}

}  // namespace ganwatch
