// Copyright 2026 The ganwatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Image-quality metrics: multi-scale SSIM for diversity scoring and a
// Frechet distance over embedded features for quality scoring. Everything is
// seeded and deterministic so calibrated thresholds stay comparable across
// runs.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ganwatch/error.hpp"
#include "ganwatch/rng.hpp"
#include "ganwatch/telemetry.hpp"

namespace ganwatch {

// ---------------------------------------------------------------------------
// SSIM / MS-SSIM
// ---------------------------------------------------------------------------

struct SsimParams {
  int window_size = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  /// Pixel dynamic range L; rasters here live in [0, 1].
  double dynamic_range = 1.0;
  /// 0 resolves the scale count automatically from the image size.
  int num_scales = 0;
  std::array<double, 5> scale_weights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

  void validate() const {
    if (window_size < 3 || window_size % 2 == 0) {
      throw std::invalid_argument("SsimParams: window_size must be odd and >= 3");
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("SsimParams: sigma must be > 0");
    if (!(k1 > 0.0) || !(k2 > 0.0)) throw std::invalid_argument("SsimParams: k1,k2 must be > 0");
    if (!(dynamic_range > 0.0)) {
      throw std::invalid_argument("SsimParams: dynamic_range must be > 0");
    }
    if (num_scales < 0 || num_scales > 5) {
      throw std::invalid_argument("SsimParams: num_scales must be in [0, 5]");
    }
    for (double w : scale_weights) {
      if (!(w > 0.0)) throw std::invalid_argument("SsimParams: scale weights must be > 0");
    }
  }
};

namespace detail {

inline std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    taps[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

struct Map {
  int h = 0, w = 0;
  std::vector<double> v;
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

/// Separable valid-region convolution; output is (h-s+1) x (w-s+1).
inline Map conv_valid(const std::vector<double>& img, int h, int w,
                      const std::vector<double>& taps) {
  const int s = static_cast<int>(taps.size());
  Map horiz;
  horiz.h = h;
  horiz.w = w - s + 1;
  horiz.v.resize(static_cast<std::size_t>(horiz.h) * horiz.w);
  for (int y = 0; y < h; ++y) {
    const double* row = img.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < horiz.w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < s; ++k) acc += taps[k] * row[x + k];
      horiz.v[static_cast<std::size_t>(y) * horiz.w + x] = acc;
    }
  }
  Map out;
  out.h = h - s + 1;
  out.w = horiz.w;
  out.v.resize(static_cast<std::size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < s; ++k) {
        acc += taps[k] * horiz.v[static_cast<std::size_t>(y + k) * horiz.w + x];
      }
      out.v[static_cast<std::size_t>(y) * out.w + x] = acc;
    }
  }
  return out;
}

}  // namespace detail

/// 2-D Gaussian kernel (size x size, row-major), normalized to sum to 1.
inline std::vector<double> gaussian_window(int size, double sigma) {
  if (size < 1 || size % 2 == 0) {
    throw std::invalid_argument("gaussian_window: size must be odd and >= 1");
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_window: sigma must be > 0");
  std::vector<double> k(static_cast<std::size_t>(size) * size);
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double d2 = (y - c) * (y - c) + (x - c) * (x - c);
      const double v = std::exp(-d2 / (2.0 * sigma * sigma));
      k[static_cast<std::size_t>(y) * size + x] = v;
      total += v;
    }
  }
  for (double& v : k) v /= total;
  return k;
}

struct SsimResult {
  double mean_ssim = 0.0;
  /// Mean of the contrast-structure term alone (used at coarse scales).
  double mean_cs = 0.0;
};

/// Single-scale SSIM with a Gaussian window, averaged over the valid
/// (unpadded) region.
inline SsimResult ssim(const Image& a, const Image& b, const SsimParams& p = {}) {
  p.validate();
  if (a.height != b.height || a.width != b.width) {
    throw ValidationError("ssim: image dimensions differ");
  }
  if (std::min(a.height, a.width) < p.window_size) {
    throw ValidationError("ssim: image smaller than the filter window");
  }
  const int h = a.height, w = a.width;
  const std::vector<double> taps = detail::gaussian_taps(p.window_size, p.sigma);

  std::vector<double> aa(a.px.size()), bb(a.px.size()), ab(a.px.size());
  for (std::size_t i = 0; i < a.px.size(); ++i) {
    aa[i] = a.px[i] * a.px[i];
    bb[i] = b.px[i] * b.px[i];
    ab[i] = a.px[i] * b.px[i];
  }
  const detail::Map mu_a = detail::conv_valid(a.px, h, w, taps);
  const detail::Map mu_b = detail::conv_valid(b.px, h, w, taps);
  const detail::Map m_aa = detail::conv_valid(aa, h, w, taps);
  const detail::Map m_bb = detail::conv_valid(bb, h, w, taps);
  const detail::Map m_ab = detail::conv_valid(ab, h, w, taps);

  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  double ssim_sum = 0.0;
  double cs_sum = 0.0;
  const std::size_t n = mu_a.v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ma = mu_a.v[i], mb = mu_b.v[i];
    // Variances may round to tiny negatives for flat patches; c2 dominates
    // either way, and leaving them raw keeps ssim(x, x) exactly 1.
    const double va = m_aa.v[i] - ma * ma;
    const double vb = m_bb.v[i] - mb * mb;
    const double vab = m_ab.v[i] - ma * mb;
    const double lum_num = 2.0 * ma * mb + c1;
    const double lum_den = ma * ma + mb * mb + c1;
    const double cs_num = 2.0 * vab + c2;
    const double cs_den = va + vb + c2;
    ssim_sum += (lum_num * cs_num) / (lum_den * cs_den);
    cs_sum += cs_num / cs_den;
  }
  return {ssim_sum / static_cast<double>(n), cs_sum / static_cast<double>(n)};
}

/// 2x2 mean-pool downsampling; odd dimensions keep a partial edge cell
/// (ceil-division output size, cells average the pixels they actually cover).
inline Image downsample2x(const Image& img) {
  Image out;
  out.height = (img.height + 1) / 2;
  out.width = (img.width + 1) / 2;
  out.px.resize(static_cast<std::size_t>(out.height) * out.width);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double sum = 0.0;
      int count = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int sy = 2 * y + dy;
          const int sx = 2 * x + dx;
          if (sy < img.height && sx < img.width) {
            sum += img.at(sy, sx);
            ++count;
          }
        }
      }
      out.at(y, x) = sum / count;
    }
  }
  return out;
}

/// Number of scales the pyramid supports: levels are counted while the
/// ceil-division 2x2 pyramid keeps min(H, W) >= window_size, capped at 5.
inline int resolve_num_scales(int height, int width, const SsimParams& p) {
  int h = height, w = width;
  if (std::min(h, w) < p.window_size) {
    throw ValidationError("ms_ssim: image smaller than the filter window");
  }
  int scales = 1;
  while (scales < 5) {
    h = (h + 1) / 2;
    w = (w + 1) / 2;
    if (std::min(h, w) < p.window_size) break;
    ++scales;
  }
  return scales;
}

/// Multi-scale SSIM: contrast-structure means at the fine scales, full SSIM
/// at the coarsest, combined as a weighted geometric mean. Scale weights are
/// truncated to the resolved scale count and renormalized.
inline double ms_ssim(const Image& a, const Image& b, const SsimParams& p = {}) {
  p.validate();
  if (a.height != b.height || a.width != b.width) {
    throw ValidationError("ms_ssim: image dimensions differ");
  }
  const int auto_scales = resolve_num_scales(a.height, a.width, p);
  const int scales = p.num_scales == 0 ? auto_scales : p.num_scales;
  if (scales > auto_scales) {
    throw ValidationError("ms_ssim: image too small for " + std::to_string(scales) +
                          " scales (supports " + std::to_string(auto_scales) + ")");
  }
  std::array<double, 5> w = p.scale_weights;
  const double w_total = std::accumulate(w.begin(), w.begin() + scales, 0.0);
  for (int i = 0; i < scales; ++i) w[i] /= w_total;

  Image cur_a = a;
  Image cur_b = b;
  double result = 1.0;
  for (int s = 0; s < scales; ++s) {
    const SsimResult r = ssim(cur_a, cur_b, p);
    // Negative means can only arise from anticorrelated degenerate inputs;
    // clamp so the geometric mean stays defined.
    const double term = s + 1 < scales ? std::max(r.mean_cs, 0.0) : std::max(r.mean_ssim, 0.0);
    result *= std::pow(term, w[s]);
    if (s + 1 < scales) {
      cur_a = downsample2x(cur_a);
      cur_b = downsample2x(cur_b);
    }
  }
  return result;
}

/// Mean MS-SSIM over seeded image pairs: the diversity score (higher means
/// more similar, i.e. less diverse). When the set holds at least 2*n_pairs
/// images the pairs use disjoint indices; smaller sets fall back to
/// independent distinct-index draws per pair.
inline double mean_ms_ssim(const ImageSet& set, int n_pairs, std::uint64_t seed,
                           const SsimParams& p = {}) {
  if (set.size() < 2) {
    throw ValidationError("mean_ms_ssim: need at least 2 images");
  }
  if (n_pairs < 1) throw std::invalid_argument("mean_ms_ssim: n_pairs must be >= 1");
  Rng rng(derive_seed(seed, "msssim-pairs"));
  const std::size_t n = set.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(static_cast<std::size_t>(n_pairs));
  if (n >= 2 * static_cast<std::size_t>(n_pairs)) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    for (int k = 0; k < n_pairs; ++k) {
      pairs.emplace_back(idx[2 * k], idx[2 * k + 1]);
    }
  } else {
    for (int k = 0; k < n_pairs; ++k) {
      const std::size_t i = rng.below(n);
      std::size_t j = rng.below(n - 1);
      if (j >= i) ++j;
      pairs.emplace_back(i, j);
    }
  }
  double sum = 0.0;
  for (const auto& [i, j] : pairs) {
    sum += ms_ssim(set.images[i], set.images[j], p);
  }
  return sum / static_cast<double>(n_pairs);
}

// ---------------------------------------------------------------------------
// Feature embeddings
// ---------------------------------------------------------------------------

enum class FeatureExtractorKind { PixelDownsample, RandomProjection, ExternalFile };

inline std::string_view to_string(FeatureExtractorKind k) {
  switch (k) {
    case FeatureExtractorKind::PixelDownsample: return "pixel-downsample";
    case FeatureExtractorKind::RandomProjection: return "random-projection";
    case FeatureExtractorKind::ExternalFile: return "external-file";
  }
  return "random-projection";
}

inline FeatureExtractorKind feature_extractor_kind_from_string(std::string_view s) {
  if (s == "pixel-downsample") return FeatureExtractorKind::PixelDownsample;
  if (s == "random-projection") return FeatureExtractorKind::RandomProjection;
  if (s == "external-file") return FeatureExtractorKind::ExternalFile;
  throw ValidationError("unknown feature extractor: \"" + std::string(s) + "\"");
}

struct FeatureExtractor {
  FeatureExtractorKind kind = FeatureExtractorKind::RandomProjection;
  int dim = 64;
  /// Seed for the random projection. Calibration and monitoring must share it
  /// or their feature spaces are incomparable.
  std::uint64_t seed = 0;
  /// CSV of precomputed features (one row per image) for ExternalFile.
  std::filesystem::path file;
};

namespace detail {

inline Eigen::MatrixXd load_feature_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) {
    throw ValidationError("cannot open feature file: " + p.string());
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view sv = trim(line);
    if (sv.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= sv.size()) {
      std::size_t comma = sv.find(',', start);
      if (comma == std::string_view::npos) comma = sv.size();
      row.push_back(parse_double_field(sv.substr(start, comma - start), "feature", line_no));
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError("feature file line " + std::to_string(line_no) +
                            ": inconsistent column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ValidationError("feature file is empty: " + p.string());
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
  }
  return m;
}

/// Rows-orthonormal projection (dim x D) from a seeded Gaussian matrix via
/// thin QR. Haar-distributed, so norms scale by dim/D in expectation.
inline Eigen::MatrixXd random_projection(int d_full, int dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "projection"));
  Eigen::MatrixXd g(d_full, dim);
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      g(r, c) = rng.gaussian();
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d_full, dim);
  return q.transpose();
}

}  // namespace detail

/// Embeds every image as a feature row; returns an (n x dim) matrix.
inline Eigen::MatrixXd embed(const ImageSet& set, const FeatureExtractor& ex) {
  if (set.empty()) {
    throw ValidationError("embed: empty image set");
  }
  const int h = set.height, w = set.width;
  const Eigen::Index n = static_cast<Eigen::Index>(set.size());
  switch (ex.kind) {
    case FeatureExtractorKind::PixelDownsample: {
      const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(ex.dim))));
      if (side * side != ex.dim) {
        throw std::invalid_argument("embed: pixel-downsample dim must be a perfect square");
      }
      if (side > std::min(h, w)) {
        throw ValidationError("embed: pixel-downsample grid larger than the image");
      }
      Eigen::MatrixXd feats(n, ex.dim);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Image& img = set.images[static_cast<std::size_t>(i)];
        for (int cy = 0; cy < side; ++cy) {
          const int y0 = cy * h / side, y1 = (cy + 1) * h / side;
          for (int cx = 0; cx < side; ++cx) {
            const int x0 = cx * w / side, x1 = (cx + 1) * w / side;
            double sum = 0.0;
            for (int y = y0; y < y1; ++y) {
              for (int x = x0; x < x1; ++x) sum += img.at(y, x);
            }
            feats(i, cy * side + cx) = sum / ((y1 - y0) * (x1 - x0));
          }
        }
      }
      return feats;
    }
    case FeatureExtractorKind::RandomProjection: {
      const int d_full = h * w;
      if (ex.dim < 1 || ex.dim > d_full) {
        throw std::invalid_argument("embed: projection dim must be in [1, H*W]");
      }
      const Eigen::MatrixXd proj = detail::random_projection(d_full, ex.dim, ex.seed);
      Eigen::MatrixXd flat(n, d_full);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Image& img = set.images[static_cast<std::size_t>(i)];
        for (int k = 0; k < d_full; ++k) flat(i, k) = img.px[static_cast<std::size_t>(k)];
      }
      return flat * proj.transpose();
    }
    case FeatureExtractorKind::ExternalFile: {
      Eigen::MatrixXd feats = detail::load_feature_csv(ex.file);
      if (feats.rows() != n) {
        throw ValidationError("embed: feature file has " + std::to_string(feats.rows()) +
                              " rows for " + std::to_string(n) + " images");
      }
      return feats;
    }
  }
  throw std::invalid_argument("embed: unknown extractor kind");
}

// ---------------------------------------------------------------------------
// Frechet distance
// ---------------------------------------------------------------------------

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and unbiased covariance with an eps ridge for stability.
inline GaussianStats fit_gaussian(const Eigen::MatrixXd& feats, double eps = 1e-6) {
  if (feats.rows() < 2) {
    throw ValidationError("fit_gaussian: need at least 2 samples");
  }
  GaussianStats s;
  s.mean = feats.colwise().mean();
  const Eigen::MatrixXd centered = feats.rowwise() - s.mean.transpose();
  s.cov = (centered.transpose() * centered) / static_cast<double>(feats.rows() - 1);
  s.cov += eps * Eigen::MatrixXd::Identity(feats.cols(), feats.cols());
  return s;
}

/// Symmetric PSD matrix square root via eigendecomposition; negative
/// eigenvalues from rounding are clamped to zero.
inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("sqrtm_psd: matrix must be square");
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8) {
    throw std::invalid_argument("sqrtm_psd: matrix is not symmetric (max asymmetry " +
                                std::to_string(asym) + ")");
  }
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw Error("sqrtm_psd: eigendecomposition failed");
  }
  Eigen::VectorXd roots = es.eigenvalues();
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    roots[i] = std::sqrt(std::max(roots[i], 0.0));
  }
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

inline double fid_from_stats(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size()) {
    throw ValidationError("fid: feature dimensions differ");
  }
  const Eigen::MatrixXd root_a = sqrtm_psd(a.cov);
  // Symmetrized product keeps the sqrtm argument PSD:
  // tr sqrt(Sa Sb) == tr sqrt(Sa^1/2 Sb Sa^1/2).
  Eigen::MatrixXd inner = root_a * b.cov * root_a;
  inner = 0.5 * (inner + inner.transpose());
  const Eigen::MatrixXd cross = sqrtm_psd(inner);
  const double dist = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() -
                      2.0 * cross.trace();
  return std::max(dist, 0.0);
}

/// Frechet distance between Gaussians fit to two feature matrices.
inline double fid(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b,
                  double eps = 1e-6) {
  if (feats_a.cols() != feats_b.cols()) {
    throw ValidationError("fid: feature dimensions differ");
  }
  return fid_from_stats(fit_gaussian(feats_a, eps), fit_gaussian(feats_b, eps));
}

// ---------------------------------------------------------------------------
// Snapshot evaluation
// ---------------------------------------------------------------------------

struct SamplingConfig {
  int n_pairs = 50;
  int n_samples = 100;
  SsimParams ssim;
  FeatureExtractor extractor;
};

/// One metric evaluation of a snapshot against the training reference.
struct MetricsSnapshot {
  std::int64_t epoch = 0;
  double msssim_synth = 0.0;
  double fid_train_synth = 0.0;
  std::uint64_t sample_seed = 0;
  int n_pairs = 0;
  int n_samples = 0;
};

namespace detail {

/// Seeded subset of feature rows: all rows (in order) when the matrix is
/// small enough, otherwise a shuffled sample without replacement.
inline Eigen::MatrixXd sample_rows(const Eigen::MatrixXd& feats, int n_samples,
                                   std::uint64_t seed) {
  if (feats.rows() <= n_samples) {
    return feats;
  }
  std::vector<std::size_t> idx(static_cast<std::size_t>(feats.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  Eigen::MatrixXd out(n_samples, feats.cols());
  for (int i = 0; i < n_samples; ++i) {
    out.row(i) = feats.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]));
  }
  return out;
}

}  // namespace detail

/// Scores one snapshot: synthetic-set diversity (mean MS-SSIM) and quality
/// against the training set (FID over seeded 100-sample subsets).
inline MetricsSnapshot compute_snapshot(const ImageSet& train, const ImageSet& synth,
                                        std::int64_t epoch, std::uint64_t seed,
                                        const SamplingConfig& sc = {}) {
  if (sc.n_samples < 2) {
    throw std::invalid_argument("compute_snapshot: n_samples must be >= 2");
  }
  MetricsSnapshot snap;
  snap.epoch = epoch;
  snap.sample_seed = seed;
  snap.n_pairs = sc.n_pairs;
  snap.n_samples = sc.n_samples;
  snap.msssim_synth = mean_ms_ssim(synth, sc.n_pairs, derive_seed(seed, "snap-msssim"), sc.ssim);
  const Eigen::MatrixXd f_train = embed(train, sc.extractor);
  const Eigen::MatrixXd f_synth = embed(synth, sc.extractor);
  const Eigen::MatrixXd sub_train =
      detail::sample_rows(f_train, sc.n_samples, derive_seed(seed, "snap-fid-train"));
  const Eigen::MatrixXd sub_synth =
      detail::sample_rows(f_synth, sc.n_samples, derive_seed(seed, "snap-fid-synth"));
  snap.fid_train_synth = fid(sub_train, sub_synth);
  return snap;
}

}  // namespace ganwatch
