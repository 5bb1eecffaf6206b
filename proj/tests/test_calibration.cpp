// Copyright 2026 The ganwatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "ganwatch/calibration.hpp"

#include <cmath>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "ganwatch/simulator.hpp"
#include "test_util.hpp"

namespace gw = ganwatch;
using ganwatch_test::ScopedTempDir;
using ganwatch_test::write_text;

namespace {

gw::ImageSet blob_set(int n, std::uint64_t seed, int n_modes = 4, double offset_x = 0.0) {
  gw::ImageDistribution dist;
  dist.size = 32;
  dist.n_modes = n_modes;
  dist.blob_radius = 4.0;
  dist.center_offset_x = offset_x;
  return gw::simulate_images(dist, n, seed);
}

gw::SamplingConfig small_sampling() {
  gw::SamplingConfig sc;
  sc.n_pairs = 10;
  sc.n_samples = 40;
  sc.extractor.dim = 16;
  sc.extractor.seed = 9;
  return sc;
}

TEST(ThresholdModeStrings, RoundTrip) {
  EXPECT_EQ(gw::threshold_mode_from_string("min"), gw::ThresholdMode::Min);
  EXPECT_EQ(gw::threshold_mode_from_string("max"), gw::ThresholdMode::Max);
  EXPECT_EQ(gw::to_string(gw::ThresholdMode::Min), "min");
  EXPECT_EQ(gw::to_string(gw::ThresholdMode::Max), "max");
  EXPECT_THROW(gw::threshold_mode_from_string("median"), gw::ValidationError);
}

TEST(EffectiveBests, MinAndMaxCollapse) {
  gw::Thresholds th;
  th.msssim_th1 = 0.3;
  th.msssim_th2 = 0.4;
  th.fid_th1 = 5.0;
  th.fid_th2 = 7.0;
  const gw::EffectiveBests lo = gw::effective_bests(th);
  EXPECT_DOUBLE_EQ(lo.best_msssim, 0.3);
  EXPECT_DOUBLE_EQ(lo.best_fid, 5.0);
  const gw::EffectiveBests hi = gw::effective_bests(th, gw::ThresholdMode::Max);
  EXPECT_DOUBLE_EQ(hi.best_msssim, 0.4);
  EXPECT_DOUBLE_EQ(hi.best_fid, 7.0);
}

TEST(CalibrateThresholds, TrainEqualsTestCollapsesThePairs) {
  // With the same set on both sides and every feature row used (the set is
  // smaller than n_samples), the cross-set values must degenerate: the two
  // MS-SSIM baselines coincide and the train/test FID is numerically zero.
  const gw::ImageSet set = blob_set(20, 3);
  const gw::Thresholds th = gw::calibrate_thresholds(set, set, 11, small_sampling());
  EXPECT_EQ(th.msssim_th1, th.msssim_th2);
  EXPECT_LE(th.fid_th2, 1e-6);
  EXPECT_GT(th.fid_th1, 0.0);  // disjoint halves differ
  EXPECT_TRUE(th.warnings.empty());
  EXPECT_EQ(th.seed, 11u);
}

TEST(CalibrateThresholds, DeterministicInInputsAndSeed) {
  const gw::ImageSet train = blob_set(24, 5);
  const gw::ImageSet test = blob_set(24, 6);
  const gw::Thresholds a = gw::calibrate_thresholds(train, test, 7, small_sampling());
  const gw::Thresholds b = gw::calibrate_thresholds(train, test, 7, small_sampling());
  EXPECT_EQ(a.msssim_th1, b.msssim_th1);
  EXPECT_EQ(a.msssim_th2, b.msssim_th2);
  EXPECT_EQ(a.fid_th1, b.fid_th1);
  EXPECT_EQ(a.fid_th2, b.fid_th2);
  const gw::Thresholds c = gw::calibrate_thresholds(train, test, 8, small_sampling());
  EXPECT_TRUE(a.msssim_th1 != c.msssim_th1 || a.fid_th1 != c.fid_th1);
}

TEST(CalibrateThresholds, SmallTrainSetWarnsAndOverlaps) {
  // Below four training images there are no disjoint halves; both draws see
  // every row, so the train/train FID collapses to zero with a warning.
  const gw::ImageSet train = blob_set(3, 13);
  const gw::ImageSet test = blob_set(5, 14);
  gw::SamplingConfig sc = small_sampling();
  sc.n_pairs = 3;
  const gw::Thresholds th = gw::calibrate_thresholds(train, test, 1, sc);
  ASSERT_EQ(th.warnings.size(), 1u);
  EXPECT_THAT(th.warnings.front(), testing::HasSubstr("disjoint"));
  EXPECT_LE(th.fid_th1, 1e-6);
  EXPECT_GE(th.fid_th2, 0.0);
}

TEST(CalibrateThresholds, ShiftedTestDistributionRaisesCrossFid) {
  const gw::ImageSet train = blob_set(30, 3);
  const gw::ImageSet test_same = blob_set(30, 4);
  const gw::ImageSet test_shift = blob_set(30, 4, 4, 6.0);
  const gw::SamplingConfig sc = small_sampling();
  const gw::Thresholds same = gw::calibrate_thresholds(train, test_same, 2, sc);
  const gw::Thresholds shift = gw::calibrate_thresholds(train, test_shift, 2, sc);
  EXPECT_GT(shift.fid_th2, same.fid_th2);
}

TEST(CalibrateThresholds, ExternalFileExtractorNeedsPerSetFiles) {
  const gw::ImageSet train = blob_set(4, 21);
  const gw::ImageSet test = blob_set(4, 22);
  gw::SamplingConfig sc;
  sc.n_pairs = 2;
  sc.n_samples = 4;
  sc.extractor.kind = gw::FeatureExtractorKind::ExternalFile;
  sc.extractor.dim = 3;
  EXPECT_THROW(gw::calibrate_thresholds(train, test, 1, sc), gw::ValidationError);

  ScopedTempDir dir;
  write_text(dir / "train.csv", "0.0,0.0,0.0\n1.0,0.0,0.0\n0.0,1.0,0.0\n0.0,0.0,1.0\n");
  write_text(dir / "test.csv", "0.5,0.5,0.0\n0.5,0.0,0.5\n0.0,0.5,0.5\n0.5,0.5,0.5\n");
  const gw::Thresholds th =
      gw::calibrate_thresholds(train, test, 1, sc, dir / "train.csv", dir / "test.csv");
  EXPECT_TRUE(std::isfinite(th.fid_th1));
  EXPECT_TRUE(std::isfinite(th.fid_th2));
  EXPECT_GT(th.fid_th2, 0.0);
}

TEST(CalibrateThresholds, RejectsTinySets) {
  const gw::ImageSet one = blob_set(1, 2);
  const gw::ImageSet ok = blob_set(4, 2);
  EXPECT_THROW(gw::calibrate_thresholds(one, ok, 1, small_sampling()), gw::ValidationError);
  EXPECT_THROW(gw::calibrate_thresholds(ok, one, 1, small_sampling()), gw::ValidationError);
}

TEST(ThresholdsJson, RoundTripIsExact) {
  gw::Thresholds th;
  th.msssim_th1 = 0.1 + 0.2;  // deliberately non-representable
  th.msssim_th2 = 0.7071067811865476;
  th.fid_th1 = 126.00000001;
  th.fid_th2 = 181.5;
  th.seed = 0xDEADBEEFu;
  th.sampling.n_pairs = 25;
  th.sampling.n_samples = 60;
  th.sampling.ssim.num_scales = 3;
  th.sampling.extractor.kind = gw::FeatureExtractorKind::PixelDownsample;
  th.sampling.extractor.dim = 49;
  th.sampling.extractor.seed = 77;
  th.warnings = {"w1", "w2"};
  const gw::Thresholds back = gw::thresholds_from_json(gw::thresholds_to_json(th));
  EXPECT_EQ(back.msssim_th1, th.msssim_th1);
  EXPECT_EQ(back.msssim_th2, th.msssim_th2);
  EXPECT_EQ(back.fid_th1, th.fid_th1);
  EXPECT_EQ(back.fid_th2, th.fid_th2);
  EXPECT_EQ(back.seed, th.seed);
  EXPECT_EQ(back.sampling.n_pairs, 25);
  EXPECT_EQ(back.sampling.n_samples, 60);
  EXPECT_EQ(back.sampling.ssim.num_scales, 3);
  EXPECT_EQ(back.sampling.extractor.kind, gw::FeatureExtractorKind::PixelDownsample);
  EXPECT_EQ(back.sampling.extractor.dim, 49);
  EXPECT_EQ(back.sampling.extractor.seed, 77u);
  EXPECT_EQ(back.warnings, th.warnings);
}

TEST(ThresholdsJson, SaveLoadThroughFile) {
  gw::Thresholds th;
  th.msssim_th1 = 0.55;
  th.msssim_th2 = 0.70;
  th.fid_th1 = 126.0;
  th.fid_th2 = 181.0;
  th.seed = 42;
  ScopedTempDir dir;
  gw::save_thresholds(th, dir / "th.json");
  const gw::Thresholds back = gw::load_thresholds(dir / "th.json");
  EXPECT_EQ(back.msssim_th1, 0.55);
  EXPECT_EQ(back.fid_th2, 181.0);
  EXPECT_EQ(back.seed, 42u);
}

TEST(ThresholdsJson, RejectsWrongSchemaMissingFieldsAndBadValues) {
  gw::Thresholds th;
  th.msssim_th1 = 0.5;
  nlohmann::json good = gw::thresholds_to_json(th);

  nlohmann::json wrong = good;
  wrong["schema"] = "ganwatch-thresholds-v9";
  EXPECT_THROW(gw::thresholds_from_json(wrong), gw::ValidationError);

  nlohmann::json missing = good;
  missing.erase("fid_th1");
  EXPECT_THROW(gw::thresholds_from_json(missing), gw::ValidationError);

  nlohmann::json bad = good;
  bad["msssim_th1"] = 1.5;
  EXPECT_THROW(gw::thresholds_from_json(bad), gw::ValidationError);

  ScopedTempDir dir;
  EXPECT_THROW(gw::load_thresholds(dir / "absent.json"), gw::ValidationError);
  write_text(dir / "garbage.json", "{not json");
  EXPECT_THROW(gw::load_thresholds(dir / "garbage.json"), gw::ParseError);
}

TEST(Thresholds, ValidateRejectsNonFiniteAndOutOfRange) {
  gw::Thresholds th;
  th.msssim_th1 = std::nan("");
  EXPECT_THROW(th.validate(), gw::ValidationError);
  th = {};
  th.msssim_th2 = 1.2;
  EXPECT_THROW(th.validate(), gw::ValidationError);
  th = {};
  th.fid_th1 = -0.5;
  EXPECT_THROW(th.validate(), gw::ValidationError);
  th = {};
  EXPECT_NO_THROW(th.validate());
}

}  // namespace
