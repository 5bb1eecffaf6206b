// Copyright 2026 The ganwatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Ingestion types for training telemetry: per-epoch loss records and
// snapshot image sets, plus the file formats they travel in (JSONL/CSV loss
// logs, binary P5 PGM rasters).

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganwatch/error.hpp"

namespace ganwatch {

// ---------------------------------------------------------------------------
// Loss telemetry
// ---------------------------------------------------------------------------

/// Loss formulation the run was trained with. Metadata only: detectors and
/// metrics are loss-agnostic.
enum class LossKind { BinaryCrossEntropy, RelativisticHinge, Other };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::BinaryCrossEntropy: return "binary-cross-entropy";
    case LossKind::RelativisticHinge: return "relativistic-hinge";
    case LossKind::Other: return "other";
  }
  return "other";
}

inline LossKind loss_kind_from_string(std::string_view s) {
  if (s == "binary-cross-entropy") return LossKind::BinaryCrossEntropy;
  if (s == "relativistic-hinge") return LossKind::RelativisticHinge;
  if (s == "other") return LossKind::Other;
  throw ValidationError("unknown loss kind: \"" + std::string(s) + "\"");
}

/// One epoch of generator/discriminator losses.
struct LossRecord {
  std::int64_t epoch = 0;
  double g_loss = 0.0;
  double d_loss = 0.0;

  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

/// A jump in the epoch sequence: records go straight from `from_epoch` to
/// `to_epoch` with the epochs in between missing.
struct EpochGap {
  std::int64_t from_epoch = 0;
  std::int64_t to_epoch = 0;

  friend bool operator==(const EpochGap&, const EpochGap&) = default;
};

/// Ordered per-epoch loss trajectory. Epochs are strictly increasing; any
/// discontinuities are listed explicitly in `gaps`.
struct LossSeries {
  std::vector<LossRecord> records;
  LossKind kind = LossKind::Other;
  std::vector<EpochGap> gaps;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  std::vector<double> g_values() const {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(r.g_loss);
    return v;
  }
  std::vector<double> d_values() const {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(r.d_loss);
    return v;
  }
};

enum class LogFormat { Jsonl, Csv };

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline double parse_double_field(std::string_view text, std::string_view field,
                                 std::size_t line_no) {
  text = trim(text);
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line_no) + ": field " +
                     std::string(field) + " is not a number: \"" +
                     std::string(text) + "\"");
  }
  return value;
}

inline void check_finite(double value, std::string_view field, std::int64_t epoch,
                         std::size_t line_no) {
  if (!std::isfinite(value)) {
    throw ValidationError("line " + std::to_string(line_no) + ": non-finite " +
                          std::string(field) + " at epoch " + std::to_string(epoch));
  }
}

inline double json_number_field(const nlohmann::json& obj, const char* field,
                                std::size_t line_no) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ValidationError("line " + std::to_string(line_no) + ": missing field " +
                          std::string(field));
  }
  if (!it->is_number()) {
    throw ValidationError("line " + std::to_string(line_no) + ": field " +
                          std::string(field) + " is not a number");
  }
  return it->get<double>();
}

}  // namespace detail

/// Parses a single loss-log line. `line_no` is 1-based and used in error
/// messages only.
inline LossRecord parse_loss_line(std::string_view line, std::size_t line_no,
                                  LogFormat format) {
  LossRecord rec;
  if (format == LogFormat::Jsonl) {
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected a JSON object");
    }
    auto it = obj.find("epoch");
    if (it == obj.end() || !it->is_number_integer()) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": missing or non-integer field epoch");
    }
    rec.epoch = it->get<std::int64_t>();
    rec.g_loss = detail::json_number_field(obj, "g_loss", line_no);
    rec.d_loss = detail::json_number_field(obj, "d_loss", line_no);
  } else {
    std::string_view s = detail::trim(line);
    const auto c1 = s.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : s.find(',', c1 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos ||
        s.find(',', c2 + 1) != std::string_view::npos) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 3 comma-separated fields");
    }
    std::string_view epoch_text = detail::trim(s.substr(0, c1));
    const char* end = epoch_text.data() + epoch_text.size();
    auto [ptr, ec] = std::from_chars(epoch_text.data(), end, rec.epoch);
    if (ec != std::errc() || ptr != end) {
      throw ParseError("line " + std::to_string(line_no) + ": field epoch is not an integer: \"" +
                       std::string(epoch_text) + "\"");
    }
    rec.g_loss = detail::parse_double_field(s.substr(c1 + 1, c2 - c1 - 1), "g_loss", line_no);
    rec.d_loss = detail::parse_double_field(s.substr(c2 + 1), "d_loss", line_no);
  }
  detail::check_finite(rec.g_loss, "g_loss", rec.epoch, line_no);
  detail::check_finite(rec.d_loss, "d_loss", rec.epoch, line_no);
  return rec;
}

namespace detail {

/// Sorts by epoch, rejects duplicates, records gaps.
inline void finalize_series(LossSeries& series) {
  if (series.records.empty()) {
    throw ValidationError("empty loss log");
  }
  std::stable_sort(series.records.begin(), series.records.end(),
                   [](const LossRecord& a, const LossRecord& b) { return a.epoch < b.epoch; });
  series.gaps.clear();
  for (std::size_t i = 1; i < series.records.size(); ++i) {
    const std::int64_t prev = series.records[i - 1].epoch;
    const std::int64_t cur = series.records[i].epoch;
    if (cur == prev) {
      throw ValidationError("duplicate epoch " + std::to_string(cur));
    }
    if (cur != prev + 1) {
      series.gaps.push_back({prev, cur});
    }
  }
}

}  // namespace detail

/// Parses a whole loss log. JSONL: one object per line. CSV: header
/// `epoch,g_loss,d_loss` then rows. Blank lines are ignored.
inline LossSeries parse_loss_log(std::istream& in, LogFormat format) {
  LossSeries series;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = detail::trim(line);
    if (sv.empty()) continue;
    if (format == LogFormat::Csv && !header_seen) {
      if (sv != "epoch,g_loss,d_loss") {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected CSV header \"epoch,g_loss,d_loss\"");
      }
      header_seen = true;
      continue;
    }
    series.records.push_back(parse_loss_line(sv, line_no, format));
  }
  detail::finalize_series(series);
  return series;
}

/// Infers the format from the extension (.csv -> CSV, anything else JSONL).
inline LogFormat log_format_for_path(const std::filesystem::path& p) {
  return p.extension() == ".csv" ? LogFormat::Csv : LogFormat::Jsonl;
}

inline LossSeries load_loss_log(const std::filesystem::path& p,
                                std::optional<LogFormat> format = std::nullopt) {
  std::ifstream in(p);
  if (!in) {
    throw ValidationError("cannot open loss log: " + p.string());
  }
  return parse_loss_log(in, format.value_or(log_format_for_path(p)));
}

/// Sub-series covering epochs in (end_epoch - width, end_epoch]. Only epochs
/// actually present are returned; `end_epoch` itself must be present.
inline LossSeries slice_window(const LossSeries& series, std::int64_t end_epoch,
                               std::int64_t width) {
  if (width < 1) {
    throw std::invalid_argument("slice_window: width must be >= 1");
  }
  const auto end_it = std::find_if(
      series.records.begin(), series.records.end(),
      [end_epoch](const LossRecord& r) { return r.epoch == end_epoch; });
  if (end_it == series.records.end()) {
    throw ValidationError("slice_window: epoch " + std::to_string(end_epoch) +
                          " not present in series");
  }
  LossSeries out;
  out.kind = series.kind;
  for (const auto& r : series.records) {
    if (r.epoch > end_epoch - width && r.epoch <= end_epoch) {
      out.records.push_back(r);
    }
  }
  detail::finalize_series(out);
  return out;
}

// ---------------------------------------------------------------------------
// Image telemetry
// ---------------------------------------------------------------------------

/// Grayscale raster, row-major, pixels in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> px;

  double& at(int y, int x) { return px[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return px[static_cast<std::size_t>(y) * width + x]; }
};

/// A set of same-sized rasters (one training batch or one snapshot).
struct ImageSet {
  int height = 0;
  int width = 0;
  std::vector<Image> images;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
};

inline ImageSet make_image_set(std::vector<Image> images) {
  ImageSet set;
  if (images.empty()) {
    throw ValidationError("image set is empty");
  }
  set.height = images.front().height;
  set.width = images.front().width;
  for (const auto& img : images) {
    if (img.height != set.height || img.width != set.width) {
      throw ValidationError("mixed image dimensions in set: " +
                            std::to_string(set.width) + "x" + std::to_string(set.height) +
                            " vs " + std::to_string(img.width) + "x" +
                            std::to_string(img.height));
    }
    if (img.px.size() != static_cast<std::size_t>(img.height) * img.width) {
      throw ValidationError("image pixel buffer does not match its dimensions");
    }
  }
  set.images = std::move(images);
  return set;
}

namespace detail {

inline int pgm_header_int(std::istream& in, const std::filesystem::path& p) {
  // Whitespace and '#' comment lines may separate header tokens.
  int c = in.peek();
  while (c != EOF) {
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
    c = in.peek();
  }
  int value = 0;
  if (!(in >> value)) {
    throw ParseError("malformed PGM header in " + p.string());
  }
  return value;
}

}  // namespace detail

/// Reads a binary P5 PGM with maxval 255. Pixels are scaled to [0, 1].
inline Image read_pgm(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open image: " + p.string());
  }
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') {
    throw ParseError("unsupported image format (want binary P5 PGM): " + p.string());
  }
  const int width = detail::pgm_header_int(in, p);
  const int height = detail::pgm_header_int(in, p);
  const int maxval = detail::pgm_header_int(in, p);
  if (width <= 0 || height <= 0) {
    throw ValidationError("invalid PGM dimensions in " + p.string());
  }
  if (maxval != 255) {
    throw ValidationError("unsupported PGM maxval " + std::to_string(maxval) +
                          " (want 255): " + p.string());
  }
  in.get();  // single whitespace byte after maxval
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw ParseError("truncated PGM pixel data in " + p.string());
  }
  Image img;
  img.height = height;
  img.width = width;
  img.px.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.px[i] = bytes[i] / 255.0;
  }
  return img;
}

/// Writes a binary P5 PGM with maxval 255, rounding pixels to 8 bits.
inline void write_pgm(const std::filesystem::path& p, const Image& img) {
  std::ofstream out(p, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot write image: " + p.string());
  }
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> bytes;
  bytes.reserve(img.px.size());
  for (double v : img.px) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    bytes.push_back(static_cast<unsigned char>(std::lround(clamped * 255.0)));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw ValidationError("short write for image: " + p.string());
  }
}

/// Loads an explicit list of PGM files as one set.
inline ImageSet load_image_set(const std::vector<std::filesystem::path>& files) {
  if (files.empty()) {
    throw ValidationError("no image files given");
  }
  std::vector<Image> images;
  images.reserve(files.size());
  for (const auto& f : files) {
    images.push_back(read_pgm(f));
  }
  return make_image_set(std::move(images));
}

/// Loads every *.pgm in a directory, sorted by filename.
inline ImageSet load_image_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw ValidationError("no .pgm files in directory: " + dir.string());
  }
  return load_image_set(files);
}

/// Discovers `epoch_<N>` snapshot directories, sorted by epoch. Accepts
/// either a run root (scans its `snapshots/` subdirectory) or the snapshots
/// directory itself.
inline std::vector<std::pair<std::int64_t, std::filesystem::path>> list_snapshot_dirs(
    const std::filesystem::path& run_dir) {
  std::vector<std::pair<std::int64_t, std::filesystem::path>> out;
  auto snaps = run_dir / "snapshots";
  if (!std::filesystem::is_directory(snaps)) snaps = run_dir;
  if (!std::filesystem::is_directory(snaps)) {
    return out;
  }
  constexpr std::string_view prefix = "epoch_";
  for (const auto& entry : std::filesystem::directory_iterator(snaps)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) != 0) continue;
    std::int64_t epoch = 0;
    const char* begin = name.data() + prefix.size();
    const char* end = name.data() + name.size();
    auto [ptr, ec] = std::from_chars(begin, end, epoch);
    if (ec != std::errc() || ptr != end) continue;
    out.emplace_back(epoch, entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ganwatch
