#include "tempspy/inference.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

using namespace tempspy;

namespace {

std::vector<double> grid(double lo, double step, double hi) {
  std::vector<double> out;
  for (int i = 0; lo + i * step <= hi + 1e-9; ++i) out.push_back(lo + i * step);
  return out;
}

DecayBitmap bitmap_of(std::vector<std::uint64_t> cells, std::uint64_t n = 64) {
  DecayBitmap b;
  b.region_size_bits = n;
  b.flipped = std::move(cells);
  return b;
}

ModelParams noiseless() {
  ModelParams p;
  p.noise_sigma = 0.0;
  return p;
}

const std::vector<std::uint64_t> kSeed{1};

// Real-temperature table whose records follow T = c1 * exp(c2 * bf) exactly.
EnrollmentTable formula_table(const std::vector<std::pair<std::size_t, std::pair<double, double>>>& points) {
  EnrollmentTable t;
  t.mode = EnrollmentMode::real_temperature;
  t.base_decay_time_s = 240;
  t.region_size_bits = 1 << 20;
  for (const auto& [bf, c] : points)
    t.records.push_back({c.first * std::exp(c.second * static_cast<double>(bf)), 240, bf, std::nullopt, {}, {bf}});
  return t;
}

}  // namespace

TEST(MajorityVote, ThreeCells) {
  const std::vector<std::uint64_t> cells{3, 7, 9};
  EXPECT_TRUE(majority_vote(bitmap_of({3, 9}), cells));
  EXPECT_FALSE(majority_vote(bitmap_of({7}), cells));
  EXPECT_TRUE(majority_vote(bitmap_of({3, 7, 9}), cells));
  EXPECT_FALSE(majority_vote(bitmap_of({}), cells));
}

TEST(MajorityVote, ExhaustiveErrorTolerance) {
  for (std::size_t l : {3u, 5u, 7u}) {
    std::vector<std::uint64_t> cells;
    for (std::uint64_t i = 0; i < l; ++i) cells.push_back(i);
    for (std::uint64_t mask = 0; mask < (1u << l); ++mask) {
      DecayBitmap flipped = bitmap_of({}), missing = bitmap_of({});
      std::size_t errors = 0;
      for (std::uint64_t i = 0; i < l; ++i) {
        const bool err = (mask >> i) & 1;
        errors += err;
        if (err) flipped.flipped.push_back(i);  // should stay intact but flipped
        else missing.flipped.push_back(i);      // should flip and did
      }
      const bool tolerable = 2 * errors < l;
      EXPECT_EQ(majority_vote(missing, cells), tolerable) << "l=" << l << " mask=" << mask;
      EXPECT_EQ(!majority_vote(flipped, cells), tolerable) << "l=" << l << " mask=" << mask;
    }
  }
}

TEST(SelectIndicatorCells, OneDegreeGridLThreeAt120s) {
  const auto a = CellArray::build(1, 16ULL << 20, ModelParams{});
  const auto table = enroll_real(a, grid(20, 1, 45), 120, kSeed);
  const auto set = select_indicator_cells(table, 3);
  EXPECT_EQ(set.steps.size(), 25u);
  EXPECT_EQ(set.stored_cells(), 3u * 25u);
  EXPECT_NO_THROW(set.validate());
  for (std::size_t i = 0; i < set.steps.size(); ++i)
    for (auto c : set.steps[i]) {
      EXPECT_FALSE(table.records[i].bitmap->contains(c));
      EXPECT_TRUE(table.records[i + 1].bitmap->contains(c));
    }
}

TEST(SelectIndicatorCells, OneDegreeGridLTwentyOneAt60s) {
  const auto a = CellArray::build(2, 16ULL << 20, ModelParams{});
  const auto set = select_indicator_cells(enroll_real(a, grid(20, 1, 45), 60, kSeed), 21);
  EXPECT_EQ(set.stored_cells(), 21u * 25u);
}

TEST(SelectIndicatorCells, TooFewCandidatesIsAnAdvisoryError) {
  EnrollmentTable t;
  t.base_decay_time_s = 60;
  t.region_size_bits = 64;
  t.records.push_back({20, 60, 2, bitmap_of({1, 2}), {}, {2}});
  t.records.push_back({21, 60, 3, bitmap_of({1, 2, 5}), {}, {3}});
  try {
    select_indicator_cells(t, 3);
    FAIL() << "expected InsufficientCandidatesError";
  } catch (const InsufficientCandidatesError& e) {
    EXPECT_EQ(e.found(), 1u);
    EXPECT_EQ(e.wanted(), 3u);
    EXPECT_NE(std::string(e.what()).find("a larger DRAM region or a longer decay time t should be used"),
              std::string::npos);
  }
}

TEST(SelectIndicatorCells, RejectsEvenOrTinyL) {
  const auto a = CellArray::build(3, 1 << 16, ModelParams{});
  const auto t = enroll_real(a, std::vector<double>{40, 60}, 240, kSeed);
  EXPECT_THROW(select_indicator_cells(t, 4), ArgumentError);
  EXPECT_THROW(select_indicator_cells(t, 1), ArgumentError);
}

TEST(SelectIndicatorCells, PrefersCellsStableAcrossRepetitions) {
  EnrollmentTable t;
  t.base_decay_time_s = 60;
  t.region_size_bits = 64;
  // Candidates 10..14; in the second repetition 10 and 11 misbehave.
  EnrollmentRecord lo{20, 60, 0, bitmap_of({}), {bitmap_of({10})}, {0, 1}};
  EnrollmentRecord hi{21, 60, 5, bitmap_of({10, 11, 12, 13, 14}), {bitmap_of({10, 12, 13, 14})}, {5, 4}};
  t.records = {lo, hi};
  const auto set = select_indicator_cells(t, 3);
  EXPECT_EQ(set.steps[0], (std::vector<std::uint64_t>{12, 13, 14}));
}

TEST(DecodeVotes, HighestPassingStep) {
  const std::vector<double> temps{20, 21, 22, 23};
  auto r = decode_votes({true, true, false}, temps);
  EXPECT_DOUBLE_EQ(r.temp_c, 22);
  EXPECT_TRUE(r.consistent);
  r = decode_votes({false, false, false}, temps);
  EXPECT_DOUBLE_EQ(r.temp_c, 20);
  r = decode_votes({true, true, true}, temps);
  EXPECT_DOUBLE_EQ(r.temp_c, 23);
  r = decode_votes({false, true, false}, temps);
  EXPECT_DOUBLE_EQ(r.temp_c, 22);
  EXPECT_FALSE(r.consistent);
  EXPECT_THROW(decode_votes({true}, temps), ArgumentError);
}

TEST(DecodeTemperature, NoiselessBitmapAtGridPointDecodesExactly) {
  const auto a = CellArray::build(4, 16ULL << 20, noiseless());
  const auto temps = grid(20, 1, 45);
  const auto set = select_indicator_cells(enroll_real(a, temps, 120, kSeed), 5);
  for (double temp : temps) {
    const auto r = decode_temperature(decay_measure(a, temp, 120, 99), set);
    EXPECT_DOUBLE_EQ(r.temp_c, temp);
    EXPECT_TRUE(r.consistent);
  }
  EXPECT_DOUBLE_EQ(decode_temperature(decay_measure(a, 80, 120, 1), set).temp_c, 45.0);
  EXPECT_DOUBLE_EQ(decode_temperature(decay_measure(a, 0, 120, 1), set).temp_c, 20.0);
}

TEST(DecodeTemperature, NoiselessDecodingIsMonotone) {
  const auto a = CellArray::build(5, 16ULL << 20, noiseless());
  const auto set = select_indicator_cells(enroll_real(a, grid(20, 1, 45), 120, kSeed), 3);
  double prev = -1e9;
  for (double temp = 15; temp <= 50; temp += 0.25) {
    const double decoded = decode_temperature(decay_measure(a, temp, 120, 0), set).temp_c;
    EXPECT_GE(decoded, prev) << "T=" << temp;
    prev = decoded;
  }
}

TEST(DecodeTemperature, ChecksMeasurementConditions) {
  const auto a = CellArray::build(6, 1 << 20, noiseless());
  const auto set = select_indicator_cells(enroll_real(a, std::vector<double>{40, 60}, 240, kSeed), 3);
  EXPECT_THROW(decode_temperature(decay_measure(a, 50, 120, 0), set), ArgumentError);
  const auto other = CellArray::build(6, 1 << 19, noiseless());
  EXPECT_THROW(decode_temperature(decay_measure(other, 50, 240, 0), set), ArgumentError);
}

TEST(FitApproxModel, RecoversFormulaConstantsExactly) {
  const double c1a = 4.0, c2a = 2e-4, c1b = 9.0, c2b = 5e-5;
  // Records at counts 2000..8000 follow segment A, 9000..20000 segment B.
  std::vector<std::pair<std::size_t, std::pair<double, double>>> points;
  for (std::size_t bf : {2000, 4000, 6000, 8000}) points.push_back({bf, {c1a, c2a}});
  // Midway between the last A record (19.81 C) and the first B record (24.46 C).
  const double boundary = 0.5 * (c1a * std::exp(c2a * 8000) + c1b * std::exp(c2b * 20000));
  for (std::size_t bf : {20000, 26000, 32000}) points.push_back({bf, {c1b, c2b}});
  const auto table = formula_table(points);
  const std::vector<double> bounds{table.records.front().nominal_temp_c, boundary, table.records.back().nominal_temp_c};
  const auto m = fit_approx_model(table, bounds);
  ASSERT_EQ(m.segments.size(), 2u);
  EXPECT_NEAR(m.segments[0].c1, c1a, 1e-9 * c1a);
  EXPECT_NEAR(m.segments[0].c2, c2a, 1e-9 * c2a);
  EXPECT_NEAR(m.segments[1].c1, c1b, 1e-9 * c1b);
  EXPECT_NEAR(m.segments[1].c2, c2b, 1e-9 * c2b);
  EXPECT_TRUE(m.monotone());
}

TEST(FitApproxModel, ReproducesSimulatedEnrollmentAbove25C) {
  const auto a = CellArray::build(7, 16ULL << 20, ModelParams{});
  const auto table = enroll_real(a, grid(0, 2.5, 70), 240, kSeed, false);
  const auto m = fit_approx_model(table, grid(0, 5, 70));
  EXPECT_TRUE(m.monotone());
  for (const auto& r : table.records)
    if (r.nominal_temp_c >= 25)
      EXPECT_NEAR(approx_temperature(m, static_cast<double>(r.flip_count)), r.nominal_temp_c, 0.5)
          << "T=" << r.nominal_temp_c;
}

TEST(FitApproxModel, InsufficientRecords) {
  const auto a = CellArray::build(8, 1 << 20, ModelParams{});
  const auto table = enroll_real(a, grid(0, 2.5, 70), 240, kSeed, false);
  EXPECT_THROW(fit_approx_model(table, std::vector<double>{25, 26, 70}), InsufficientDataError);
  // [0, 2.5] keeps only the 2.5 C record once T <= 0.5 C is excluded.
  EXPECT_THROW(fit_approx_model(table, std::vector<double>{0, 2.5, 70}), InsufficientDataError);
  EXPECT_THROW(fit_approx_model(table, std::vector<double>{-5, 25, 70}), ArgumentError);
  EXPECT_THROW(fit_approx_model(table, std::vector<double>{25}), ArgumentError);
}

TEST(ComputeP, Ratio) {
  EXPECT_DOUBLE_EQ(compute_p(1000, 800), 1.25);
  EXPECT_DOUBLE_EQ(compute_p(4321, 4321), 1.0);
  EXPECT_THROW(compute_p(1000, 0), DegenerateCalibrationError);
}

TEST(ComputeP, SameBoardSameMeasurementIsOne) {
  const auto a = CellArray::build(9, 1 << 22, ModelParams{});
  const auto b = decay_measure(a, 40, 240, 3);
  EXPECT_DOUBLE_EQ(compute_p(static_cast<double>(b.size()), static_cast<double>(b.size())), 1.0);
}

namespace {

ApproxModel two_segment_model() {
  ApproxModel m;
  m.segments = {{10, 30, 5.0, 1e-3}, {30, 60, 12.0, 2e-4}};
  m.decay_time_s = 240;
  return m;
}

}  // namespace

TEST(ApproxTemperature, ClampsToRange) {
  const auto m = two_segment_model();
  EXPECT_DOUBLE_EQ(approx_temperature(m, 0.0), 10.0);
  EXPECT_DOUBLE_EQ(approx_temperature(m, 1e9), 60.0);
}

TEST(ApproxTemperature, PicksSegmentContainingItsOwnOutput) {
  const auto m = two_segment_model();
  const double bf = 1000;  // 5 e^{1} = 13.59 lies in [10, 30]
  EXPECT_NEAR(approx_temperature(m, bf), 5 * std::exp(1.0), 1e-12);
  const double bf_hi = 6000;  // first segment gives 2017 (out), second 12 e^{1.2} = 39.84
  EXPECT_NEAR(approx_temperature(m, bf_hi), 12 * std::exp(1.2), 1e-12);
}

TEST(ApproxTemperature, NonDecreasingInCount) {
  const auto a = CellArray::build(10, 16ULL << 20, ModelParams{});
  const auto m = fit_approx_model(enroll_real(a, grid(0, 2.5, 70), 240, kSeed, false), std::vector<double>{0, 25, 45, 70});
  ASSERT_TRUE(m.monotone());
  double prev = -1;
  for (double bf = 0; bf < 60000; bf += 37) {
    const double t = approx_temperature(m, bf);
    EXPECT_GE(t, prev) << "bf=" << bf;
    prev = t;
  }
}

TEST(ApproxTemperature, PScalingIsExact) {
  auto m = two_segment_model();
  m.p = 1.37;
  auto unit = m;
  unit.p = 1.0;
  for (double bf : {0.0, 250.0, 1234.0, 5000.0, 77777.0})
    EXPECT_EQ(approx_temperature(m, bf), approx_temperature(unit, bf * 1.37));
}

TEST(ApproxTemperature, AveragesRepeatedCounts) {
  const auto m = two_segment_model();
  const std::vector<double> counts{900, 1000, 1100};
  EXPECT_DOUBLE_EQ(approx_temperature(m, counts), approx_temperature(m, 1000.0));
  EXPECT_THROW(approx_temperature(m, std::vector<double>{}), ArgumentError);
}

TEST(ApproxModel, ExpectedCountInvertsSegment) {
  const auto m = two_segment_model();
  EXPECT_NEAR(m.expected_count(5 * std::exp(1.0)), 1000, 1e-9);
  EXPECT_THROW(m.expected_count(75), RangeError);
}

TEST(ApproxModel, ValidateCatchesGapsAndBadConstants) {
  auto m = two_segment_model();
  EXPECT_NO_THROW(m.validate());
  m.segments[1].t_lo = 31;
  EXPECT_THROW(m.validate(), ArgumentError);
  m = two_segment_model();
  m.segments[0].c1 = -1;
  EXPECT_THROW(m.validate(), ArgumentError);
  m = two_segment_model();
  m.p = 0;
  EXPECT_THROW(m.validate(), ArgumentError);
}
