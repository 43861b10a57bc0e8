#include "tempspy/bitmap_io.hpp"
#include "tempspy/dram_sim.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace tempspy;

namespace {

ModelParams noiseless() {
  ModelParams p;
  p.noise_sigma = 0.0;
  return p;
}

// Independent oracle: expected flipped fraction of the region for a noiseless
// measurement, straight from the log-normal CDF.
double expected_fraction(const ModelParams& p, double temp_c, double t) {
  const double x = std::log(t) + p.k_true * (temp_c - p.ref_temp_c);
  const double z = (x - p.retention_log_mean - std::log(p.retention_scale)) / p.retention_log_sigma;
  return p.charged_probability * 0.5 * std::erfc(-z / std::sqrt(2.0));
}

const CellArray& shared_array() {
  static const CellArray a = CellArray::build(7, 1ULL << 22, ModelParams{});
  return a;
}

}  // namespace

TEST(CellArray, BuildIsDeterministic) {
  const auto a = CellArray::build(42, 1 << 16, ModelParams{});
  const auto b = CellArray::build(42, 1 << 16, ModelParams{});
  EXPECT_TRUE(a == b);
  EXPECT_EQ(decay_measure(a, 40, 120, 5), decay_measure(b, 40, 120, 5));
}

TEST(CellArray, DifferentSeedsGiveDifferentDevices) {
  const auto a = CellArray::build(1, 1 << 20, ModelParams{});
  const auto b = CellArray::build(2, 1 << 20, ModelParams{});
  EXPECT_FALSE(a == b);
  EXPECT_NE(decay_measure(a, 60, 240, 1).flipped, decay_measure(b, 60, 240, 1).flipped);
}

TEST(CellArray, ChargedFractionNearHalf) {
  const auto& a = shared_array();
  const double frac = static_cast<double>(a.charged_count()) / static_cast<double>(a.size_bits());
  EXPECT_GE(frac, 0.45);
  EXPECT_LE(frac, 0.55);
  std::uint64_t counted = 0;
  for (std::uint64_t i = 0; i < 1 << 16; ++i) counted += a.charged(i);
  EXPECT_NEAR(static_cast<double>(counted) / 65536.0, 0.5, 0.02);
}

TEST(CellArray, RetentionOnlyForChargedCells) {
  const auto a = CellArray::build(3, 1024, ModelParams{});
  for (std::uint64_t i = 0; i < 1024; ++i) EXPECT_EQ(a.retention_ref_s(i).has_value(), a.charged(i));
  EXPECT_FALSE(a.retention_ref_s(1024).has_value());
}

TEST(CellArray, RejectsBadParameters) {
  ModelParams p;
  p.retention_log_sigma = 0;
  try {
    CellArray::build(1, 64, p);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "retention_log_sigma");
  }
  EXPECT_THROW(CellArray::build(1, 0, ModelParams{}), ConfigError);
  p = {};
  p.noise_sigma = -1;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.charged_probability = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(DecayMeasure, ZeroDecayTimeFlipsNothing) {
  const auto bitmap = decay_measure(shared_array(), 70, 0, 1);
  EXPECT_TRUE(bitmap.empty());
  EXPECT_EQ(count_flips(bitmap), 0u);
}

TEST(DecayMeasure, RejectsOutOfRangeInput) {
  EXPECT_THROW(decay_measure(shared_array(), 95, 60, 1), RangeError);
  EXPECT_THROW(decay_measure(shared_array(), -25, 60, 1), RangeError);
  EXPECT_THROW(decay_measure(shared_array(), 25, -1, 1), ArgumentError);
  EXPECT_NO_THROW(decay_measure(shared_array(), kMaxTempC, 60, 1));
  EXPECT_NO_THROW(decay_measure(shared_array(), kMinTempC, 60, 1));
}

TEST(DecayMeasure, BitmapIsSortedAndChargedOnly) {
  const auto& a = shared_array();
  const auto bitmap = decay_measure(a, 50, 120, 9);
  EXPECT_NO_THROW(bitmap.validate());
  for (auto c : bitmap.flipped) EXPECT_TRUE(a.charged(c));
}

TEST(DecayMeasure, NoiselessCountMatchesLogNormalOracle) {
  const auto a = CellArray::build(11, 1ULL << 22, noiseless());
  for (double temp : {25.0, 40.0, 60.0}) {
    for (double t : {60.0, 240.0}) {
      const double n = static_cast<double>(a.size_bits());
      const double f = expected_fraction(a.params(), temp, t);
      const double sd = std::sqrt(n * f * (1 - f));
      const double got = static_cast<double>(decay_measure(a, temp, t, 0).size());
      EXPECT_NEAR(got, n * f, 5 * sd) << "T=" << temp << " t=" << t;
    }
  }
}

TEST(DecayMeasure, FlipFractionAt40CWithinCalibrationBracket) {
  const auto& a = shared_array();
  const double f = static_cast<double>(decay_measure(a, 40, 120, 1).size()) / static_cast<double>(a.size_bits());
  EXPECT_GE(f, 1e-5);
  EXPECT_LE(f, 1e-3);
}

TEST(DecayMeasure, MonotoneInTimeAndTemperatureWithoutNoise) {
  const auto a = CellArray::build(5, 1 << 20, noiseless());
  std::size_t prev = 0;
  for (double t : {30.0, 60.0, 120.0, 240.0, 480.0}) {
    const auto n = decay_measure(a, 45, t, 0).size();
    EXPECT_GE(n, prev);
    prev = n;
  }
  prev = 0;
  for (double temp = 0; temp <= 90; temp += 7.5) {
    const auto n = decay_measure(a, temp, 120, 0).size();
    EXPECT_GE(n, prev);
    prev = n;
  }
}

TEST(DecayMeasure, SubsetLawWithoutNoise) {
  const auto a = CellArray::build(8, 1 << 20, noiseless());
  const auto lo = decay_measure(a, 30, 120, 0);
  const auto hi = decay_measure(a, 35, 120, 0);
  EXPECT_TRUE(std::includes(hi.flipped.begin(), hi.flipped.end(), lo.flipped.begin(), lo.flipped.end()));
  EXPECT_GT(hi.size(), lo.size());
}

TEST(DecayMeasure, TemperatureShiftEqualsTimeScalingWithoutNoise) {
  const auto a = CellArray::build(21, 1 << 21, noiseless());
  const double k = a.params().k_true;
  for (double dT : {0.5, 3.0, 12.0}) {
    const auto hot = decay_measure(a, 30 + dT, 90, 0);
    const auto stretched = decay_measure(a, 30, 90 * std::exp(k * dT), 0);
    EXPECT_EQ(hot.flipped, stretched.flipped) << "dT=" << dT;
  }
}

TEST(DecayMeasure, NoiselessResultIgnoresMeasurementSeed) {
  const auto a = CellArray::build(4, 1 << 18, noiseless());
  EXPECT_EQ(decay_measure(a, 55, 200, 1).flipped, decay_measure(a, 55, 200, 999).flipped);
}

TEST(DecayMeasure, NoiseChangesOnlyBoundaryCells) {
  const auto& a = shared_array();
  const auto x = decay_measure(a, 45, 120, 1);
  const auto y = decay_measure(a, 45, 120, 2);
  EXPECT_NE(x.flipped, y.flipped);
  std::vector<std::uint64_t> common;
  std::set_intersection(x.flipped.begin(), x.flipped.end(), y.flipped.begin(), y.flipped.end(),
                        std::back_inserter(common));
  EXPECT_GT(static_cast<double>(common.size()), 0.95 * static_cast<double>(x.size()));
}

TEST(DecayMeasure, ExtremeDecayFlipsEveryChargedCell) {
  const auto a = CellArray::build(6, 4096, ModelParams{});
  const auto bitmap = decay_measure(a, 90, 1e30, 1);
  EXPECT_EQ(bitmap.size(), a.charged_count());
}

TEST(DecayMeasure, FullScanAgreesWithWeakCellCache) {
  ModelParams scan = ModelParams{};
  scan.weak_cache_time_s = 1e-3;  // forces the full-scan path
  const auto cached = CellArray::build(13, 1 << 18, ModelParams{});
  const auto scanned = CellArray::build(13, 1 << 18, scan);
  for (double temp : {20.0, 50.0, 80.0})
    EXPECT_EQ(decay_measure(cached, temp, 300, 3).flipped, decay_measure(scanned, temp, 300, 3).flipped);
}

TEST(Jitter, IsMeanOneInLinearDomain) {
  const double sigma = 0.05;
  double sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += std::exp(CellArray::log_jitter(77, static_cast<std::uint64_t>(i), sigma));
  EXPECT_NEAR(sum / n, 1.0, 1e-3);
  EXPECT_EQ(CellArray::log_jitter(77, 5, 0.0), 0.0);
}

TEST(Jitter, EffectiveSigmaScalesWithInverseRootTime) {
  ModelParams p;
  EXPECT_DOUBLE_EQ(p.effective_noise_sigma(120), 0.006);
  EXPECT_DOUBLE_EQ(p.effective_noise_sigma(30), 0.012);
  p.noise_time_exponent = 0;
  EXPECT_DOUBLE_EQ(p.effective_noise_sigma(30), 0.006);
}

TEST(CountFlips, CountsIndices) {
  DecayBitmap b;
  b.region_size_bits = 10;
  EXPECT_EQ(count_flips(b), 0u);
  b.flipped = {1, 4, 9};
  EXPECT_EQ(count_flips(b), 3u);
  EXPECT_TRUE(b.contains(4));
  EXPECT_FALSE(b.contains(5));
}

TEST(BitmapIo, BinaryRoundTrip) {
  const auto bitmap = decay_measure(shared_array(), 50, 120, 3);
  std::stringstream ss;
  write_bitmap_binary(ss, bitmap);
  EXPECT_EQ(ss.str().size(), 8 * (bitmap.size() + 1));
  const auto back = read_bitmap_binary(ss, bitmap.region_size_bits);
  EXPECT_EQ(back.flipped, bitmap.flipped);
}

TEST(BitmapIo, BinaryIsLittleEndian) {
  DecayBitmap b;
  b.region_size_bits = 1000;
  b.flipped = {258};
  std::stringstream ss;
  write_bitmap_binary(ss, b);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 16u);
  EXPECT_EQ(bytes[0], 1);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[9], 1);
}

TEST(BitmapIo, CsvRoundTrip) {
  const auto bitmap = decay_measure(shared_array(), 35, 60, 4);
  std::stringstream ss;
  write_bitmap_csv(ss, bitmap);
  EXPECT_EQ(read_bitmap_csv(ss, bitmap.region_size_bits).flipped, bitmap.flipped);
}

TEST(BitmapIo, RejectsMalformedInput) {
  std::stringstream truncated(std::string("\x02\0\0\0\0\0\0\0\x01\0\0", 11));
  EXPECT_THROW(read_bitmap_binary(truncated, 100), ArgumentError);
  std::stringstream unsorted("index\n5\n3\n");
  EXPECT_THROW(read_bitmap_csv(unsorted, 100), ArgumentError);
  std::stringstream outside("index\n100\n");
  EXPECT_THROW(read_bitmap_csv(outside, 100), ArgumentError);
  std::stringstream header("cell\n1\n");
  EXPECT_THROW(read_bitmap_csv(header, 100), ArgumentError);
}
