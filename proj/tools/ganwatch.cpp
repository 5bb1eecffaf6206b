// Copyright 2026 The ganwatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// ganwatch command-line tool: calibrate thresholds, monitor a training run
// (batch or live), analyze loss logs, compute standalone metrics, simulate
// labeled runs, and re-render reports.
//
// Exit codes: 0 = completed without an early stop (includes max-epochs),
// 2 = input or schema error, 10 = stopped for metric stagnation,
// 11 = stopped for loss-pathology persistence.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ganwatch/ganwatch.hpp"

namespace gw = ganwatch;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitMetricStagnation = 10;
constexpr int kExitLossPathology = 11;

int exit_code_for(const gw::StopDecision& d) {
  switch (d.reason) {
    case gw::StopReason::MetricStagnation: return kExitMetricStagnation;
    case gw::StopReason::LossPathologyPersistence: return kExitLossPathology;
    case gw::StopReason::NotStopped:
    case gw::StopReason::MaxEpochsReached: return kExitOk;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Shared flag groups
// ---------------------------------------------------------------------------

void add_detector_flags(CLI::App* cmd, gw::DetectorConfig& d) {
  cmd->add_option("--window", d.window, "Detector window length in epochs")
      ->capture_default_str();
  cmd->add_option("--const-rel-eps", d.const_rel_eps, "Relative range bound for constancy")
      ->capture_default_str();
  cmd->add_option("--const-abs-eps", d.const_abs_eps, "Absolute range bound for constancy")
      ->capture_default_str();
  cmd->add_option("--jump-threshold", d.jump_threshold,
                  "Min absolute single-step change flagged abrupt")
      ->capture_default_str();
  cmd->add_option("--slope-threshold", d.slope_threshold,
                  "Least-squares slope magnitude flagged sharp (per epoch)")
      ->capture_default_str();
  cmd->add_option("--osc-min-crossings", d.osc_min_crossings,
                  "Min detrended zero-crossing rate (per epoch)")
      ->capture_default_str();
  cmd->add_option("--osc-min-amp", d.osc_min_amp, "Min oscillation amplitude")
      ->capture_default_str();
  cmd->add_option("--d-zero-eps", d.d_zero_eps, "Discriminator-collapse level")
      ->capture_default_str();
  cmd->add_option("--healthy-ratio-tol", d.healthy_ratio_tol,
                  "Relative tolerance on g ~= 2*d")
      ->capture_default_str();
}

struct ExtractorFlags {
  std::string kind = "random-projection";
  int dim = 64;
  std::optional<std::uint64_t> seed;
};

void add_extractor_flags(CLI::App* cmd, ExtractorFlags& ex) {
  cmd->add_option("--extractor", ex.kind, "Feature extractor for FID")
      ->check(CLI::IsMember({"pixel-downsample", "random-projection", "external-file"}))
      ->capture_default_str();
  cmd->add_option("--dim", ex.dim, "Feature dimension")->capture_default_str();
  cmd->add_option("--extractor-seed", ex.seed,
                  "Seed for the random projection (default: --seed)");
}

gw::FeatureExtractor make_extractor(const ExtractorFlags& ex, std::uint64_t default_seed) {
  gw::FeatureExtractor out;
  out.kind = gw::feature_extractor_kind_from_string(ex.kind);
  out.dim = ex.dim;
  out.seed = ex.seed.value_or(default_seed);
  return out;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string train_dir;
  std::string test_dir;
  std::uint64_t seed = 42;
  int n_pairs = 50;
  int n_samples = 100;
  ExtractorFlags extractor;
  std::string features_train;
  std::string features_test;
  std::string out = "thresholds.json";
  int ssim_window = 11;
  double ssim_sigma = 1.5;
};

int run_calibrate(const CalibrateArgs& a) {
  gw::SamplingConfig sc;
  sc.n_pairs = a.n_pairs;
  sc.n_samples = a.n_samples;
  sc.ssim.window_size = a.ssim_window;
  sc.ssim.sigma = a.ssim_sigma;
  sc.extractor = make_extractor(a.extractor, a.seed);
  const gw::ImageSet train = gw::load_image_dir(a.train_dir);
  const gw::ImageSet test = gw::load_image_dir(a.test_dir);
  const gw::Thresholds th =
      gw::calibrate_thresholds(train, test, a.seed, sc, a.features_train, a.features_test);
  for (const std::string& w : th.warnings) std::cerr << "warning: " << w << "\n";
  gw::save_thresholds(th, a.out);
  std::cout << gw::thresholds_to_json(th).dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// monitor
// ---------------------------------------------------------------------------

struct MonitorArgs {
  std::string loss_log;
  std::string loss_format;  // "", "jsonl", "csv"
  std::string thresholds_file;
  std::string snapshots_dir;
  std::string train_dir;
  std::string test_dir;
  std::string metrics_file;
  std::string output_dir = ".";
  std::uint64_t seed = 42;
  std::int64_t patience = 200;
  std::int64_t eval_interval = 50;
  std::int64_t max_epochs = 1000;
  bool gate_on_constancy = false;
  bool resample_thresholds = false;
  std::string threshold_mode = "min";
  gw::DetectorConfig detector;
};

/// One pending metric evaluation: either precomputed scripted values or a
/// snapshot directory to score when the loss stream reaches its epoch.
struct PendingEval {
  std::int64_t epoch = 0;
  std::optional<gw::ScriptEval> scripted;
  fs::path snapshot_dir;
};

struct EpochCsvRow {
  std::int64_t epoch;
  double g_loss;
  double d_loss;
  std::string label;
  std::int64_t loss_problem_count;
  std::int64_t epochs_since_improvement;
  std::int64_t best_epoch;
};

int run_monitor(const MonitorArgs& a) {
  if (!a.snapshots_dir.empty() && !a.metrics_file.empty()) {
    throw gw::ValidationError("monitor: --snapshots-dir and --metrics-file are exclusive");
  }
  const bool metrics_active = !a.snapshots_dir.empty() || !a.metrics_file.empty();
  if (metrics_active && a.thresholds_file.empty()) {
    throw gw::ValidationError("monitor: metric evaluation needs --thresholds");
  }
  if (!a.snapshots_dir.empty() && a.train_dir.empty()) {
    throw gw::ValidationError("monitor: --snapshots-dir needs --train-dir for the FID reference");
  }
  if (a.resample_thresholds && (a.train_dir.empty() || a.test_dir.empty())) {
    throw gw::ValidationError(
        "monitor: --resample-thresholds needs --train-dir and --test-dir");
  }

  gw::SentinelConfig cfg;
  cfg.max_epochs = a.max_epochs;
  cfg.patience = a.patience;
  cfg.eval_interval = a.eval_interval;
  cfg.gate_on_constancy = a.gate_on_constancy;
  cfg.metrics_enabled = metrics_active;
  cfg.detector = a.detector;
  cfg.threshold_mode = gw::threshold_mode_from_string(a.threshold_mode);

  gw::Thresholds th;
  if (!a.thresholds_file.empty()) {
    th = gw::load_thresholds(a.thresholds_file);
  } else {
    // Loss-only monitoring: neutral placeholders, never consulted.
    th.msssim_th1 = th.msssim_th2 = 1.0;
    th.fid_th1 = th.fid_th2 = 0.0;
  }
  if (metrics_active && th.sampling.extractor.kind == gw::FeatureExtractorKind::ExternalFile &&
      !a.snapshots_dir.empty()) {
    throw gw::ValidationError(
        "monitor: the external-file extractor is not supported for snapshot scoring");
  }

  // Build the evaluation plan up front; snapshots are *scored* lazily so a
  // stop decision never depends on data past the stopping point.
  std::deque<PendingEval> plan;
  if (!a.metrics_file.empty()) {
    for (const gw::ScriptEval& ev : gw::load_metric_script(a.metrics_file)) {
      PendingEval p;
      p.epoch = ev.epoch;
      p.scripted = ev;
      plan.push_back(p);
    }
  } else if (!a.snapshots_dir.empty()) {
    for (const auto& [epoch, dir] : gw::list_snapshot_dirs(a.snapshots_dir)) {
      if (epoch <= 0 || epoch % cfg.eval_interval != 0) {
        throw gw::ValidationError("monitor: snapshot epoch " + std::to_string(epoch) +
                                  " is not a positive multiple of eval interval " +
                                  std::to_string(cfg.eval_interval));
      }
      PendingEval p;
      p.epoch = epoch;
      p.snapshot_dir = dir;
      plan.push_back(p);
    }
    if (plan.empty()) {
      throw gw::ValidationError("monitor: no epoch_<N> snapshot directories under " +
                                a.snapshots_dir);
    }
  }

  std::optional<gw::ImageSet> train;
  std::optional<gw::ImageSet> test;
  if (!a.train_dir.empty()) train = gw::load_image_dir(a.train_dir);
  if (a.resample_thresholds) test = gw::load_image_dir(a.test_dir);

  gw::SentinelState state = gw::sentinel_new(cfg, th);
  std::vector<EpochCsvRow> rows;

  // Input source: file or '-' for standard input, processed incrementally.
  const bool from_stdin = a.loss_log == "-";
  std::ifstream file_in;
  if (!from_stdin) {
    file_in.open(a.loss_log, std::ios::binary);
    if (!file_in) throw gw::ValidationError("cannot open loss log: " + a.loss_log);
  }
  std::istream& in = from_stdin ? std::cin : file_in;
  gw::LogFormat format = gw::LogFormat::Jsonl;
  if (!a.loss_format.empty()) {
    format = a.loss_format == "csv" ? gw::LogFormat::Csv : gw::LogFormat::Jsonl;
  } else if (!from_stdin) {
    format = gw::log_format_for_path(a.loss_log);
  }

  std::string consumed;  // exact bytes read, for the stdin digest
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  bool any_record = false;

  auto score_eval = [&](const PendingEval& p) -> gw::MetricsSnapshot {
    if (p.scripted) {
      gw::MetricsSnapshot snap;
      snap.epoch = p.scripted->epoch;
      snap.msssim_synth = p.scripted->msssim;
      snap.fid_train_synth = p.scripted->fid;
      snap.sample_seed = 0;
      return snap;
    }
    const gw::ImageSet synth = gw::load_image_dir(p.snapshot_dir);
    return gw::compute_snapshot(*train, synth, p.epoch,
                                gw::derive_seed(a.seed, "snap-" + std::to_string(p.epoch)),
                                th.sampling);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (from_stdin) {
      consumed += line;
      consumed += '\n';
    }
    const std::string_view sv = gw::detail::trim(line);
    if (sv.empty()) continue;
    if (format == gw::LogFormat::Csv && !header_seen) {
      if (sv != "epoch,g_loss,d_loss") {
        throw gw::ParseError("line " + std::to_string(line_no) +
                             ": expected CSV header \"epoch,g_loss,d_loss\"");
      }
      header_seen = true;
      continue;
    }
    const gw::LossRecord rec = gw::parse_loss_line(sv, line_no, format);
    any_record = true;
    const gw::EpochOutcome outcome = gw::observe_epoch(state, rec);

    EpochCsvRow row;
    row.epoch = rec.epoch;
    row.g_loss = rec.g_loss;
    row.d_loss = rec.d_loss;
    row.label = outcome.event ? std::string(gw::to_string(outcome.event->kind)) : "";
    row.loss_problem_count = state.loss_problem_count;
    row.epochs_since_improvement = state.epochs_since_improvement;
    row.best_epoch = state.best_epoch;
    rows.push_back(row);

    // Evaluations fall due once the loss stream reaches their epoch.
    while (!plan.empty() && plan.front().epoch <= rec.epoch) {
      const PendingEval p = plan.front();
      plan.pop_front();
      if (a.resample_thresholds) {
        const gw::Thresholds fresh = gw::calibrate_thresholds(
            *train, *test, gw::derive_seed(a.seed, "resample-" + std::to_string(p.epoch)),
            th.sampling);
        gw::refresh_bests(state, gw::effective_bests(fresh, cfg.threshold_mode));
      }
      gw::observe_evaluation(state, score_eval(p));
      rows.back().epochs_since_improvement = state.epochs_since_improvement;
      rows.back().best_epoch = state.best_epoch;
    }
    if (gw::decision(state).stopped) break;
  }
  if (!any_record) throw gw::ValidationError("empty loss log");

  // Report + per-epoch CSV.
  std::vector<gw::InputDigest> inputs;
  if (from_stdin) {
    inputs.push_back({"-", gw::fnv1a64_hex(consumed)});
  } else {
    inputs.push_back({a.loss_log, gw::fnv1a64_file(a.loss_log)});
  }
  if (!a.thresholds_file.empty()) {
    inputs.push_back({a.thresholds_file, gw::fnv1a64_file(a.thresholds_file)});
  }
  if (!a.metrics_file.empty()) {
    inputs.push_back({a.metrics_file, gw::fnv1a64_file(a.metrics_file)});
  }
  const gw::RunReport report = gw::make_report(state, std::move(inputs));
  fs::create_directories(a.output_dir);
  gw::save_report(report, fs::path(a.output_dir) / "report.json");
  {
    std::ofstream csv(fs::path(a.output_dir) / "epochs.csv", std::ios::binary);
    if (!csv) throw gw::Error("cannot write epochs.csv");
    csv.precision(17);
    csv << "epoch,g_loss,d_loss,window_label,loss_problem_count,"
           "epochs_since_improvement,best_epoch\n";
    for (const EpochCsvRow& r : rows) {
      csv << r.epoch << ',' << r.g_loss << ',' << r.d_loss << ',' << r.label << ','
          << r.loss_problem_count << ',' << r.epochs_since_improvement << ',' << r.best_epoch
          << '\n';
    }
  }
  std::cout << gw::decision_to_json(report.decision).dump(2) << "\n";
  return exit_code_for(report.decision);
}

// ---------------------------------------------------------------------------
// analyze-loss
// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string loss_log;
  std::string loss_format;
  std::string format = "json";
  gw::DetectorConfig detector;
};

int run_analyze(const AnalyzeArgs& a) {
  std::optional<gw::LogFormat> fmt;
  if (!a.loss_format.empty()) {
    fmt = a.loss_format == "csv" ? gw::LogFormat::Csv : gw::LogFormat::Jsonl;
  }
  gw::LossSeries series;
  if (a.loss_log == "-") {
    series = gw::parse_loss_log(std::cin, fmt.value_or(gw::LogFormat::Jsonl));
  } else {
    series = gw::load_loss_log(a.loss_log, fmt);
  }
  const std::vector<double> g = series.g_values();
  const std::vector<double> d = series.d_values();
  const auto n = series.records.size();
  const auto window = static_cast<std::size_t>(a.detector.window);

  std::vector<gw::PathologyEvent> segments;
  auto add = [&segments](const gw::PathologyEvent& ev) {
    if (!segments.empty() && segments.back().kind == ev.kind) {
      segments.back().epoch_end = ev.epoch_end;
      segments.back().evidence = ev.evidence;
      return;
    }
    segments.push_back(ev);
  };
  if (n < window) {
    add(gw::classify_window(g, d, a.detector, series.records.front().epoch,
                            series.records.back().epoch));
  } else {
    for (std::size_t end = window; end <= n; ++end) {
      const std::span<const double> gw_span(g.data() + (end - window), window);
      const std::span<const double> dw_span(d.data() + (end - window), window);
      add(gw::classify_window(gw_span, dw_span, a.detector,
                              series.records[end - window].epoch,
                              series.records[end - 1].epoch));
    }
  }

  if (a.format == "csv") {
    std::cout << "kind,epoch_start,epoch_end,g_mean,d_mean,g_range,d_range,g_slope,d_slope,"
                 "g_max_jump,d_max_jump,g_crossing_rate,d_crossing_rate\n";
    std::cout.precision(17);
    for (const gw::PathologyEvent& e : segments) {
      std::cout << gw::to_string(e.kind) << ',' << e.epoch_start << ',' << e.epoch_end << ','
                << e.evidence.g_mean << ',' << e.evidence.d_mean << ',' << e.evidence.g_range
                << ',' << e.evidence.d_range << ',' << e.evidence.g_slope << ','
                << e.evidence.d_slope << ',' << e.evidence.g_max_jump << ','
                << e.evidence.d_max_jump << ',' << e.evidence.g_crossing_rate << ','
                << e.evidence.d_crossing_rate << '\n';
    }
  } else {
    nlohmann::ordered_json j;
    j["schema"] = "ganwatch-analysis-v1";
    j["segments"] = nlohmann::ordered_json::array();
    for (const gw::PathologyEvent& e : segments) j["segments"].push_back(gw::event_to_json(e));
    std::cout << j.dump(2) << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ms-ssim / fid
// ---------------------------------------------------------------------------

struct MsssimArgs {
  std::string dir;
  std::uint64_t seed = 42;
  int n_pairs = 50;
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  int num_scales = 0;
};

int run_msssim(const MsssimArgs& a) {
  gw::SsimParams p;
  p.window_size = a.ssim_window;
  p.sigma = a.ssim_sigma;
  p.num_scales = a.num_scales;
  const gw::ImageSet set = gw::load_image_dir(a.dir);
  const double score = gw::mean_ms_ssim(set, a.n_pairs, a.seed, p);
  nlohmann::ordered_json j;
  j["schema"] = "ganwatch-msssim-v1";
  j["dir"] = a.dir;
  j["n_images"] = set.size();
  j["n_pairs"] = a.n_pairs;
  j["seed"] = a.seed;
  j["score"] = score;
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

struct FidArgs {
  std::string dir_a;
  std::string dir_b;
  std::uint64_t seed = 42;
  int n_samples = 100;
  ExtractorFlags extractor;
  std::string features_a;
  std::string features_b;
};

int run_fid(const FidArgs& a) {
  gw::FeatureExtractor ex = make_extractor(a.extractor, a.seed);
  const gw::ImageSet set_a = gw::load_image_dir(a.dir_a);
  const gw::ImageSet set_b = gw::load_image_dir(a.dir_b);
  gw::FeatureExtractor ex_a = ex;
  gw::FeatureExtractor ex_b = ex;
  if (ex.kind == gw::FeatureExtractorKind::ExternalFile) {
    if (a.features_a.empty() || a.features_b.empty()) {
      throw gw::ValidationError(
          "fid: the external-file extractor needs --features-a and --features-b");
    }
    ex_a.file = a.features_a;
    ex_b.file = a.features_b;
  }
  const Eigen::MatrixXd fa = gw::detail::sample_rows(gw::embed(set_a, ex_a), a.n_samples,
                                                     gw::derive_seed(a.seed, "fid-a"));
  const Eigen::MatrixXd fb = gw::detail::sample_rows(gw::embed(set_b, ex_b), a.n_samples,
                                                     gw::derive_seed(a.seed, "fid-b"));
  const double score = gw::fid(fa, fb);
  nlohmann::ordered_json j;
  j["schema"] = "ganwatch-fid-v1";
  j["a"] = a.dir_a;
  j["b"] = a.dir_b;
  j["n_samples"] = a.n_samples;
  j["seed"] = a.seed;
  j["extractor"] = a.extractor.kind;
  j["dim"] = a.extractor.dim;
  j["score"] = score;
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string out;
  std::int64_t epochs = 1000;
  std::uint64_t seed = 42;
  double noise_sigma = 0.01;
  std::int64_t eval_interval = 50;
  int images = 0;
  std::string script_file;
  // Shape overrides.
  double collapse_epoch = 5.0;
  double transient_frac = 0.25;
  double osc_period = 6.0;
  // Image distribution overrides.
  std::optional<int> n_modes;
  int image_size = 128;
  double blob_radius = 12.0;
  double center_jitter = 2.0;
  double pixel_noise = 0.02;
  double center_offset_x = 0.0;
  double center_offset_y = 0.0;
};

int run_simulate(const SimulateArgs& a) {
  gw::Scenario sc;
  sc.kind = gw::scenario_kind_from_string(a.scenario);
  sc.epochs = a.epochs;
  sc.seed = a.seed;
  sc.noise_sigma = a.noise_sigma;
  sc.collapse_epoch = a.collapse_epoch;
  sc.transient_frac = a.transient_frac;
  sc.osc_period = a.osc_period;
  if (sc.kind == gw::ScenarioKind::Scripted) {
    if (a.script_file.empty()) {
      throw gw::ValidationError("simulate: scripted scenario needs --script");
    }
    sc.script = gw::load_metric_script(a.script_file);
  }
  std::optional<gw::ImageDistribution> dist;
  if (a.images > 0) {
    gw::ImageDistribution d = gw::default_distribution(sc.kind);
    if (a.n_modes) d.n_modes = *a.n_modes;
    d.size = a.image_size;
    d.blob_radius = a.blob_radius;
    d.center_jitter = a.center_jitter;
    d.pixel_noise = a.pixel_noise;
    d.center_offset_x = a.center_offset_x;
    d.center_offset_y = a.center_offset_y;
    dist = d;
  }
  const gw::RunBundle run = gw::simulate_run(sc, a.eval_interval, a.images, dist);
  gw::emit_run(run, a.out);
  nlohmann::ordered_json j;
  j["scenario"] = a.scenario;
  j["epochs"] = a.epochs;
  j["seed"] = a.seed;
  j["out"] = a.out;
  j["snapshots"] = run.snapshots.size();
  j["scripted_evals"] = run.scripted_metrics.size();
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string in;
  std::string format = "text";
};

int run_report(const ReportArgs& a) {
  const gw::RunReport rep = gw::load_report(a.in);
  if (a.format == "csv") {
    std::cout << gw::render_report_csv(rep);
  } else {
    std::cout << gw::render_report_text(rep);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GAN-training sentinel: pathology detection, diversity/quality "
               "scoring, and patience-based early stopping"};
  app.set_config("--config", "", "Flat key = value config file mirroring the flags");
  app.require_subcommand(1);

  CalibrateArgs cal;
  CLI::App* c_cal = app.add_subcommand(
      "calibrate", "Compute baseline MS-SSIM/FID thresholds from train/test images");
  c_cal->add_option("--train-dir", cal.train_dir, "Training image directory (*.pgm)")
      ->required();
  c_cal->add_option("--test-dir", cal.test_dir, "Test image directory (*.pgm)")->required();
  c_cal->add_option("--seed", cal.seed, "Sampling seed")->capture_default_str();
  c_cal->add_option("--pairs", cal.n_pairs, "MS-SSIM pairs per score")->capture_default_str();
  c_cal->add_option("--samples", cal.n_samples, "FID samples per side")->capture_default_str();
  add_extractor_flags(c_cal, cal.extractor);
  c_cal->add_option("--features-train", cal.features_train,
                    "Precomputed feature CSV for the train set (external-file extractor)");
  c_cal->add_option("--features-test", cal.features_test,
                    "Precomputed feature CSV for the test set (external-file extractor)");
  c_cal->add_option("--window-size", cal.ssim_window, "SSIM window size")
      ->capture_default_str();
  c_cal->add_option("--sigma", cal.ssim_sigma, "SSIM window sigma")->capture_default_str();
  c_cal->add_option("--out", cal.out, "Thresholds JSON output path")->capture_default_str();

  MonitorArgs mon;
  CLI::App* c_mon = app.add_subcommand(
      "monitor", "Run the early-stopping sentinel over a loss log and snapshots");
  c_mon->add_option("--loss-log", mon.loss_log, "Loss log path, or '-' for standard input")
      ->required();
  c_mon->add_option("--loss-format", mon.loss_format, "Force the loss log format")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  c_mon->add_option("--thresholds", mon.thresholds_file, "Calibrated thresholds JSON");
  c_mon->add_option("--snapshots-dir", mon.snapshots_dir,
                    "Directory of epoch_<N> synthetic-image snapshot dirs");
  c_mon->add_option("--train-dir", mon.train_dir, "Training images (FID reference)");
  c_mon->add_option("--test-dir", mon.test_dir, "Test images (threshold resampling)");
  c_mon->add_option("--metrics-file", mon.metrics_file,
                    "Precomputed per-evaluation metric values JSON (bypasses images)");
  c_mon->add_option("--patience", mon.patience, "Stop-condition persistence in epochs")
      ->capture_default_str();
  c_mon->add_option("--eval-interval", mon.eval_interval, "Epochs between metric snapshots")
      ->capture_default_str();
  c_mon->add_option("--max-epochs", mon.max_epochs, "Training epoch budget")
      ->capture_default_str();
  c_mon->add_flag("--gate-on-constancy", mon.gate_on_constancy,
                  "Only count evaluations taken while the loss window is constant");
  c_mon->add_flag("--resample-thresholds", mon.resample_thresholds,
                  "Recalibrate thresholds before every evaluation");
  c_mon->add_option("--threshold-mode", mon.threshold_mode,
                    "How threshold pairs combine into initial bests")
      ->check(CLI::IsMember({"min", "max"}))
      ->capture_default_str();
  c_mon->add_option("--seed", mon.seed, "Snapshot sampling seed")->capture_default_str();
  c_mon->add_option("--output", mon.output_dir, "Directory for report.json and epochs.csv")
      ->capture_default_str();
  add_detector_flags(c_mon, mon.detector);

  AnalyzeArgs ana;
  CLI::App* c_ana = app.add_subcommand(
      "analyze-loss", "Classify loss-pattern pathologies over a whole log");
  c_ana->add_option("--loss-log", ana.loss_log, "Loss log path, or '-' for standard input")
      ->required();
  c_ana->add_option("--loss-format", ana.loss_format, "Force the loss log format")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  c_ana->add_option("--format", ana.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  add_detector_flags(c_ana, ana.detector);

  MsssimArgs mss;
  CLI::App* c_mss =
      app.add_subcommand("ms-ssim", "Mean MS-SSIM diversity score of an image directory");
  c_mss->add_option("--dir", mss.dir, "Image directory (*.pgm)")->required();
  c_mss->add_option("--seed", mss.seed, "Pair-sampling seed")->capture_default_str();
  c_mss->add_option("--pairs", mss.n_pairs, "Number of image pairs")->capture_default_str();
  c_mss->add_option("--window-size", mss.ssim_window, "SSIM window size")
      ->capture_default_str();
  c_mss->add_option("--sigma", mss.ssim_sigma, "SSIM window sigma")->capture_default_str();
  c_mss->add_option("--num-scales", mss.num_scales, "Pyramid scales (0 = auto)")
      ->capture_default_str();

  FidArgs fid_args;
  CLI::App* c_fid =
      app.add_subcommand("fid", "Frechet distance between two image directories");
  c_fid->add_option("--a", fid_args.dir_a, "First image directory")->required();
  c_fid->add_option("--b", fid_args.dir_b, "Second image directory")->required();
  c_fid->add_option("--seed", fid_args.seed, "Subset-sampling seed")->capture_default_str();
  c_fid->add_option("--samples", fid_args.n_samples, "Samples per side")
      ->capture_default_str();
  add_extractor_flags(c_fid, fid_args.extractor);
  c_fid->add_option("--features-a", fid_args.features_a,
                    "Precomputed feature CSV for --a (external-file extractor)");
  c_fid->add_option("--features-b", fid_args.features_b,
                    "Precomputed feature CSV for --b (external-file extractor)");

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand(
      "simulate", "Generate a labeled synthetic training run on disk");
  c_sim->add_option("--scenario", sim.scenario, "Run regime")
      ->check(CLI::IsMember(
          {"mode-collapse", "non-convergence", "instability", "healthy", "scripted"}))
      ->required();
  c_sim->add_option("--out", sim.out, "Output run directory")->required();
  c_sim->add_option("--epochs", sim.epochs, "Run length in epochs")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Generation seed")->capture_default_str();
  c_sim->add_option("--noise-sigma", sim.noise_sigma, "Observation noise level")
      ->capture_default_str();
  c_sim->add_option("--eval-interval", sim.eval_interval, "Epochs between snapshots")
      ->capture_default_str();
  c_sim->add_option("--images", sim.images,
                    "Synthetic images per snapshot (0 = losses only)")
      ->capture_default_str();
  c_sim->add_option("--script", sim.script_file,
                    "Per-evaluation metric values JSON (scripted scenario)");
  c_sim->add_option("--collapse-epoch", sim.collapse_epoch,
                    "Mode collapse: epoch by which d has collapsed")
      ->capture_default_str();
  c_sim->add_option("--transient-frac", sim.transient_frac,
                    "Non-convergence: transient fraction of the run")
      ->capture_default_str();
  c_sim->add_option("--osc-period", sim.osc_period, "Non-convergence: oscillation period")
      ->capture_default_str();
  c_sim->add_option("--n-modes", sim.n_modes, "Image modes (default: per scenario)");
  c_sim->add_option("--image-size", sim.image_size, "Raster size")->capture_default_str();
  c_sim->add_option("--blob-radius", sim.blob_radius, "Blob radius in pixels")
      ->capture_default_str();
  c_sim->add_option("--center-jitter", sim.center_jitter, "Blob position jitter std")
      ->capture_default_str();
  c_sim->add_option("--pixel-noise", sim.pixel_noise, "Per-pixel noise std")
      ->capture_default_str();
  c_sim->add_option("--center-offset-x", sim.center_offset_x, "Mode-center x offset")
      ->capture_default_str();
  c_sim->add_option("--center-offset-y", sim.center_offset_y, "Mode-center y offset")
      ->capture_default_str();

  ReportArgs rep;
  CLI::App* c_rep =
      app.add_subcommand("report", "Re-render a run report as text or plot-data CSV");
  c_rep->add_option("--in", rep.in, "Report JSON path")->required();
  c_rep->add_option("--format", rep.format, "Rendering")
      ->check(CLI::IsMember({"text", "csv"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (app.got_subcommand(c_cal)) return run_calibrate(cal);
    if (app.got_subcommand(c_mon)) return run_monitor(mon);
    if (app.got_subcommand(c_ana)) return run_analyze(ana);
    if (app.got_subcommand(c_mss)) return run_msssim(mss);
    if (app.got_subcommand(c_fid)) return run_fid(fid_args);
    if (app.got_subcommand(c_sim)) return run_simulate(sim);
    if (app.got_subcommand(c_rep)) return run_report(rep);
  } catch (const gw::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
