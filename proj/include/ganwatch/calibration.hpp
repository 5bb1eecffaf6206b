// Copyright 2026 The ganwatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Baseline threshold calibration: the four reference scores (MS-SSIM over
// train and test images, FID over train/train and train/test splits) that
// the stopping criterion measures synthetic images against.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganwatch/error.hpp"
#include "ganwatch/metrics.hpp"
#include "ganwatch/rng.hpp"
#include "ganwatch/telemetry.hpp"

namespace ganwatch {

/// How the two thresholds of each metric combine into one "best" baseline.
/// Min is the strict conjunctive reading (synthetic must beat both); Max is
/// the lenient alternative.
enum class ThresholdMode { Min, Max };

inline std::string_view to_string(ThresholdMode m) {
  return m == ThresholdMode::Min ? "min" : "max";
}

inline ThresholdMode threshold_mode_from_string(std::string_view s) {
  if (s == "min") return ThresholdMode::Min;
  if (s == "max") return ThresholdMode::Max;
  throw ValidationError("unknown threshold mode: \"" + std::string(s) + "\"");
}

struct Thresholds {
  /// Mean MS-SSIM over the training images.
  double msssim_th1 = 0.0;
  /// Mean MS-SSIM over the test images.
  double msssim_th2 = 0.0;
  /// FID between two disjoint sampled halves of the training set.
  double fid_th1 = 0.0;
  /// FID between sampled subsets of the training and test sets.
  double fid_th2 = 0.0;
  std::uint64_t seed = 0;
  /// Sampling configuration the thresholds were computed under; monitoring
  /// must reuse it (extractor seed included) for scores to be comparable.
  SamplingConfig sampling;
  std::vector<std::string> warnings;

  void validate() const {
    for (double v : {msssim_th1, msssim_th2, fid_th1, fid_th2}) {
      if (!std::isfinite(v)) throw ValidationError("thresholds: non-finite value");
    }
    if (msssim_th1 < 0.0 || msssim_th1 > 1.0 || msssim_th2 < 0.0 || msssim_th2 > 1.0) {
      throw ValidationError("thresholds: MS-SSIM values must lie in [0, 1]");
    }
    if (fid_th1 < 0.0 || fid_th2 < 0.0) {
      throw ValidationError("thresholds: FID values must be non-negative");
    }
  }
};

struct EffectiveBests {
  double best_msssim = 0.0;
  double best_fid = 0.0;
};

/// Collapses the threshold pairs into the initial "best" scores.
inline EffectiveBests effective_bests(const Thresholds& th,
                                      ThresholdMode mode = ThresholdMode::Min) {
  if (mode == ThresholdMode::Min) {
    return {std::min(th.msssim_th1, th.msssim_th2), std::min(th.fid_th1, th.fid_th2)};
  }
  return {std::max(th.msssim_th1, th.msssim_th2), std::max(th.fid_th1, th.fid_th2)};
}

/// Computes all four thresholds from the reference image sets. Deterministic
/// in (train, test, seed, cfg). The train/train FID uses disjoint shuffled
/// halves when the training set has at least 4 images; smaller sets fall
/// back to overlapping draws and record a warning. With the external-file
/// extractor, per-set feature files must be supplied (the embedded extractor
/// config can only name one file).
inline Thresholds calibrate_thresholds(const ImageSet& train, const ImageSet& test,
                                       std::uint64_t seed, const SamplingConfig& cfg = {},
                                       const std::filesystem::path& train_features = {},
                                       const std::filesystem::path& test_features = {}) {
  if (train.size() < 2 || test.size() < 2) {
    throw ValidationError("calibrate_thresholds: need at least 2 train and 2 test images");
  }
  Thresholds th;
  th.seed = seed;
  th.sampling = cfg;

  // The same sub-seed on both sets makes train == test give th1 == th2.
  const std::uint64_t msssim_seed = derive_seed(seed, "th-msssim");
  th.msssim_th1 = mean_ms_ssim(train, cfg.n_pairs, msssim_seed, cfg.ssim);
  th.msssim_th2 = mean_ms_ssim(test, cfg.n_pairs, msssim_seed, cfg.ssim);

  FeatureExtractor ex_train = cfg.extractor;
  FeatureExtractor ex_test = cfg.extractor;
  if (cfg.extractor.kind == FeatureExtractorKind::ExternalFile) {
    if (train_features.empty() || test_features.empty()) {
      throw ValidationError(
          "calibrate_thresholds: external-file extractor needs per-set feature files");
    }
    ex_train.file = train_features;
    ex_test.file = test_features;
  }
  const Eigen::MatrixXd f_train = embed(train, ex_train);
  const Eigen::MatrixXd f_test = embed(test, ex_test);

  if (f_train.rows() >= 4) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(f_train.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, "th-fid-halves"));
    rng.shuffle(idx);
    const Eigen::Index half = f_train.rows() / 2;
    const Eigen::Index take = std::min<Eigen::Index>(half, cfg.n_samples);
    Eigen::MatrixXd a(take, f_train.cols());
    Eigen::MatrixXd b(take, f_train.cols());
    for (Eigen::Index i = 0; i < take; ++i) {
      a.row(i) = f_train.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]));
      b.row(i) =
          f_train.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(half + i)]));
    }
    th.fid_th1 = fid(a, b);
  } else {
    th.warnings.push_back(
        "train set too small for disjoint halves; train/train FID uses overlapping draws");
    th.fid_th1 = fid(detail::sample_rows(f_train, cfg.n_samples, derive_seed(seed, "th-fid-h1")),
                     detail::sample_rows(f_train, cfg.n_samples, derive_seed(seed, "th-fid-h2")));
  }

  th.fid_th2 = fid(detail::sample_rows(f_train, cfg.n_samples, derive_seed(seed, "th-fid-train")),
                   detail::sample_rows(f_test, cfg.n_samples, derive_seed(seed, "th-fid-test")));
  th.validate();
  return th;
}

// ---------------------------------------------------------------------------
// Thresholds file (JSON)
// ---------------------------------------------------------------------------

inline constexpr std::string_view kThresholdsSchema = "ganwatch-thresholds-v1";

inline nlohmann::ordered_json sampling_config_to_json(const SamplingConfig& sc) {
  nlohmann::ordered_json j;
  j["n_pairs"] = sc.n_pairs;
  j["n_samples"] = sc.n_samples;
  j["ssim"] = {{"window_size", sc.ssim.window_size}, {"sigma", sc.ssim.sigma},
               {"k1", sc.ssim.k1},                   {"k2", sc.ssim.k2},
               {"dynamic_range", sc.ssim.dynamic_range}, {"num_scales", sc.ssim.num_scales}};
  j["extractor"] = {{"kind", std::string(to_string(sc.extractor.kind))},
                    {"dim", sc.extractor.dim},
                    {"seed", sc.extractor.seed},
                    {"file", sc.extractor.file.string()}};
  return j;
}

inline SamplingConfig sampling_config_from_json(const nlohmann::json& j) {
  SamplingConfig sc;
  sc.n_pairs = j.at("n_pairs").get<int>();
  sc.n_samples = j.at("n_samples").get<int>();
  const auto& js = j.at("ssim");
  sc.ssim.window_size = js.at("window_size").get<int>();
  sc.ssim.sigma = js.at("sigma").get<double>();
  sc.ssim.k1 = js.at("k1").get<double>();
  sc.ssim.k2 = js.at("k2").get<double>();
  sc.ssim.dynamic_range = js.at("dynamic_range").get<double>();
  sc.ssim.num_scales = js.at("num_scales").get<int>();
  const auto& je = j.at("extractor");
  sc.extractor.kind = feature_extractor_kind_from_string(je.at("kind").get<std::string>());
  sc.extractor.dim = je.at("dim").get<int>();
  sc.extractor.seed = je.at("seed").get<std::uint64_t>();
  sc.extractor.file = je.at("file").get<std::string>();
  return sc;
}

inline nlohmann::ordered_json thresholds_to_json(const Thresholds& th) {
  nlohmann::ordered_json j;
  j["schema"] = kThresholdsSchema;
  j["seed"] = th.seed;
  j["msssim_th1"] = th.msssim_th1;
  j["msssim_th2"] = th.msssim_th2;
  j["fid_th1"] = th.fid_th1;
  j["fid_th2"] = th.fid_th2;
  j["sampling"] = sampling_config_to_json(th.sampling);
  j["warnings"] = th.warnings;
  return j;
}

inline Thresholds thresholds_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kThresholdsSchema) {
      throw ValidationError("thresholds file: unexpected schema \"" +
                            j.at("schema").get<std::string>() + "\"");
    }
    Thresholds th;
    th.seed = j.at("seed").get<std::uint64_t>();
    th.msssim_th1 = j.at("msssim_th1").get<double>();
    th.msssim_th2 = j.at("msssim_th2").get<double>();
    th.fid_th1 = j.at("fid_th1").get<double>();
    th.fid_th2 = j.at("fid_th2").get<double>();
    th.sampling = sampling_config_from_json(j.at("sampling"));
    if (j.contains("warnings")) {
      th.warnings = j.at("warnings").get<std::vector<std::string>>();
    }
    th.validate();
    return th;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("thresholds file: ") + e.what());
  }
}

inline void save_thresholds(const Thresholds& th, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write thresholds file: " + path.string());
  out << thresholds_to_json(th).dump(2) << '\n';
}

inline Thresholds load_thresholds(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open thresholds file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("thresholds file " + path.string() + ": " + e.what());
  }
  return thresholds_from_json(j);
}

}  // namespace ganwatch
