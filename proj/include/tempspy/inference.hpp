#pragma once

// Temperature inference from decay measurements:
//  * indicator cells + majority vote, quantized to the enrollment grid;
//  * the piecewise exponential approximation T = c1 * exp(c2 * bf * p), with p
//    transferring a model enrolled on one device to another.

#include "tempspy/dram_sim.hpp"
#include "tempspy/enrollment.hpp"
#include "tempspy/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace tempspy {

// ---------------------------------------------------------------------------
// Indicator cells

struct IndicatorCellSet {
  /// steps[i] holds the l cells that flip at temps[i + 1] but not at temps[i].
  std::vector<std::vector<std::uint64_t>> steps;
  std::size_t l = 0;
  std::vector<double> temps;
  double decay_time_s = 0.0;
  std::uint64_t region_size_bits = 0;

  std::size_t stored_cells() const noexcept { return l * steps.size(); }

  void validate() const {
    if (l < 3 || l % 2 == 0) throw ArgumentError("l must be odd and >= 3");
    if (temps.size() < 2 || steps.size() + 1 != temps.size())
      throw ArgumentError("indicator set needs one step per adjacent temperature pair");
    for (const auto& cells : steps) {
      if (cells.size() != l) throw ArgumentError("every step needs exactly l cells");
      for (auto c : cells)
        if (c >= region_size_bits) throw ArgumentError("indicator cell outside region");
    }
  }
};

/// Picks l indicator cells per adjacent temperature pair. Candidates that stay
/// correct in the most enrollment repetitions win; ties go to the lowest index.
inline IndicatorCellSet select_indicator_cells(const EnrollmentTable& table, std::size_t l) {
  if (l < 3 || l % 2 == 0) throw ArgumentError("l must be odd and >= 3");
  if (table.records.size() < 2) throw InsufficientDataError("indicator selection needs at least 2 records");
  if (table.mode == EnrollmentMode::decay_sweep) throw ArgumentError("decay-sweep tables carry no temperatures");
  for (const auto& r : table.records)
    if (!r.bitmap) throw ArgumentError("indicator selection needs enrollment bitmaps");

  IndicatorCellSet set;
  set.l = l;
  set.temps = table.temperatures();
  set.decay_time_s = table.base_decay_time_s;
  set.region_size_bits = table.region_size_bits;
  for (std::size_t i = 0; i + 1 < table.records.size(); ++i) {
    const auto& lo = table.records[i];
    const auto& hi = table.records[i + 1];
    const auto candidates = candidate_cells(*lo.bitmap, *hi.bitmap);
    if (candidates.size() < l)
      throw InsufficientCandidatesError(i, lo.nominal_temp_c, hi.nominal_temp_c, candidates.size(), l);
    const std::size_t reps = std::min(lo.repeats.size(), hi.repeats.size());
    std::vector<std::pair<std::size_t, std::uint64_t>> scored;  // (correct repetitions, cell)
    scored.reserve(candidates.size());
    for (auto cell : candidates) {
      std::size_t correct = 0;
      for (std::size_t r = 0; r < reps; ++r)
        if (!lo.repeats[r].contains(cell) && hi.repeats[r].contains(cell)) ++correct;
      scored.emplace_back(correct, cell);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::uint64_t> chosen;
    for (std::size_t j = 0; j < l; ++j) chosen.push_back(scored[j].second);
    std::sort(chosen.begin(), chosen.end());
    set.steps.push_back(std::move(chosen));
  }
  return set;
}

/// True iff more than half of `cells` flipped.
inline bool majority_vote(const DecayBitmap& bitmap, std::span<const std::uint64_t> cells) {
  std::size_t flipped = 0;
  for (auto c : cells)
    if (bitmap.contains(c)) ++flipped;
  return 2 * flipped > cells.size();
}

struct DecodeResult {
  double temp_c = 0.0;
  /// Index into the enrollment temperatures.
  std::size_t level = 0;
  /// False when a lower vote failed while a higher one passed.
  bool consistent = true;
};

/// Maps per-step votes to a grid level: one above the highest passing step, 0 if none pass.
inline DecodeResult decode_votes(const std::vector<bool>& votes, std::span<const double> temps) {
  if (temps.size() != votes.size() + 1) throw ArgumentError("decode: need one more temperature than votes");
  DecodeResult result;
  std::size_t level = 0;
  for (std::size_t i = 0; i < votes.size(); ++i)
    if (votes[i]) level = i + 1;
  for (std::size_t i = 0; i < level; ++i)
    if (!votes[i]) result.consistent = false;
  result.level = level;
  result.temp_c = temps[level];
  return result;
}

inline std::vector<bool> indicator_votes(const DecayBitmap& bitmap, const IndicatorCellSet& ind) {
  std::vector<bool> votes;
  votes.reserve(ind.steps.size());
  for (const auto& cells : ind.steps) votes.push_back(majority_vote(bitmap, cells));
  return votes;
}

inline DecodeResult decode_temperature(const DecayBitmap& bitmap, const IndicatorCellSet& ind) {
  if (bitmap.region_size_bits != ind.region_size_bits) throw ArgumentError("decode: region size mismatch");
  if (std::abs(bitmap.decay_time_s - ind.decay_time_s) > 1e-9 * std::max(1.0, ind.decay_time_s))
    throw ArgumentError("decode: bitmap decay time differs from the enrollment decay time");
  return decode_votes(indicator_votes(bitmap, ind), ind.temps);
}

// ---------------------------------------------------------------------------
// Approximation function

struct ApproxSegment {
  double t_lo = 0.0;
  double t_hi = 0.0;
  double c1 = 1.0;
  double c2 = 0.0;

  double evaluate(double scaled_count) const { return c1 * std::exp(c2 * scaled_count); }
};

struct ApproxModel {
  std::vector<ApproxSegment> segments;
  double k = 0.07;
  double p = 1.0;
  double decay_time_s = 0.0;
  std::string enroll_device_id;
  std::uint64_t region_size_bits = 0;

  double range_lo() const { return segments.front().t_lo; }
  double range_hi() const { return segments.back().t_hi; }

  bool monotone() const {
    return std::all_of(segments.begin(), segments.end(), [](const auto& s) { return s.c2 > 0; });
  }

  void validate() const {
    if (segments.empty()) throw ArgumentError("model has no segments");
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& s = segments[i];
      if (!(s.c1 > 0) || !std::isfinite(s.c1) || !std::isfinite(s.c2)) throw ArgumentError("invalid c1/c2");
      if (!(s.t_hi > s.t_lo)) throw ArgumentError("empty segment");
      if (i > 0 && s.t_lo != segments[i - 1].t_hi) throw ArgumentError("segments must be contiguous");
    }
    if (!(p > 0) || !std::isfinite(p)) throw ArgumentError("p must be > 0");
  }

  /// Enrollment-scale flip count predicted at temperature `temp_c` (inverse of the model at p = 1).
  double expected_count(double temp_c) const {
    for (const auto& s : segments)
      if (temp_c >= s.t_lo && temp_c <= s.t_hi) return std::log(temp_c / s.c1) / s.c2;
    throw RangeError("temperature " + std::to_string(temp_c) + " C outside the model's fitted range");
  }
};

/// Records at or below this temperature are left out of the log-space fit.
inline constexpr double kMinFitTempC = 0.5;

/// Least-squares fit of ln T = ln c1 + c2 * bf per segment, using the mean
/// flip count of each record.
inline ApproxModel fit_approx_model(const EnrollmentTable& table, std::span<const double> segment_bounds,
                                    double k = 0.07) {
  if (table.mode != EnrollmentMode::real_temperature)
    throw ArgumentError("approximation fit needs a real-temperature enrollment");
  if (segment_bounds.size() < 2) throw ArgumentError("need at least two segment bounds");
  detail::check_strictly_increasing(segment_bounds, "segment bounds");
  const double enrolled_lo = table.records.front().nominal_temp_c;
  const double enrolled_hi = table.records.back().nominal_temp_c;
  constexpr double eps = 1e-9;
  if (segment_bounds.front() < enrolled_lo - eps || segment_bounds.back() > enrolled_hi + eps)
    throw ArgumentError("segment bounds must lie within the enrolled temperature range");

  ApproxModel model;
  model.k = k;
  model.decay_time_s = table.base_decay_time_s;
  model.region_size_bits = table.region_size_bits;
  model.enroll_device_id = "seed:" + std::to_string(table.device_seed);
  for (std::size_t j = 0; j + 1 < segment_bounds.size(); ++j) {
    const double lo = segment_bounds[j], hi = segment_bounds[j + 1];
    std::vector<double> xs, ys;
    for (const auto& r : table.records) {
      if (r.nominal_temp_c < lo - eps || r.nominal_temp_c > hi + eps || r.nominal_temp_c <= kMinFitTempC) continue;
      xs.push_back(r.mean_flip_count());
      ys.push_back(std::log(r.nominal_temp_c));
    }
    if (xs.size() < 2)
      throw InsufficientDataError("segment [" + std::to_string(lo) + ", " + std::to_string(hi) + "] has " +
                                  std::to_string(xs.size()) + " usable record(s), need 2");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0)
      throw InsufficientDataError("segment [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                  "] has no flip-count spread");
    ApproxSegment seg;
    seg.t_lo = lo;
    seg.t_hi = hi;
    seg.c2 = sxy / sxx;
    seg.c1 = std::exp(my - seg.c2 * mx);
    model.segments.push_back(seg);
  }
  return model;
}

/// Extrapolation factor between the enrollment device and an observed device,
/// both measured at the same known temperature.
inline double compute_p(double bf_enr_at_known, double bf_obs_at_known) {
  if (!(bf_obs_at_known > 0))
    throw DegenerateCalibrationError("no flips observed at the known temperature; calibration is degenerate");
  if (!(bf_enr_at_known > 0)) throw DegenerateCalibrationError("enrollment count at the known temperature is zero");
  return bf_enr_at_known / bf_obs_at_known;
}

/// Enrollment count at `known_temp_c`: the enrolled record's mean count when
/// the temperature was enrolled, otherwise the model's prediction.
inline double enrollment_count_at(const EnrollmentTable& table, const ApproxModel& model, double known_temp_c) {
  for (const auto& r : table.records)
    if (std::abs(r.nominal_temp_c - known_temp_c) < 1e-9) return r.mean_flip_count();
  return model.expected_count(known_temp_c);
}

/// Temperature for an already p-scaled count. The segment whose output falls
/// inside its own bounds is used; otherwise the segment closest to its bounds,
/// with its output clamped to them.
inline double approx_temperature_scaled(const ApproxModel& model, double scaled_count) {
  // exp() can overflow for huge counts, so the first segment seeds the choice.
  double best_distance = std::numeric_limits<double>::quiet_NaN();
  double best_value = 0.0;
  for (const auto& seg : model.segments) {
    const double value = seg.evaluate(scaled_count);
    if (value >= seg.t_lo && value <= seg.t_hi) {
      best_value = value;
      break;
    }
    const double distance = value < seg.t_lo ? seg.t_lo - value : value - seg.t_hi;
    if (std::isnan(best_distance) || distance < best_distance ||
        (distance == best_distance && value > seg.t_hi)) {
      best_distance = distance;
      best_value = std::clamp(value, seg.t_lo, seg.t_hi);
    }
  }
  return std::clamp(best_value, model.range_lo(), model.range_hi());
}

inline double approx_temperature(const ApproxModel& model, double flip_count) {
  return approx_temperature_scaled(model, flip_count * model.p);
}

/// Averages repeated counts before the lookup.
inline double approx_temperature(const ApproxModel& model, std::span<const double> flip_counts) {
  if (flip_counts.empty()) throw ArgumentError("no flip counts");
  const double mean = std::accumulate(flip_counts.begin(), flip_counts.end(), 0.0) /
                      static_cast<double>(flip_counts.size());
  return approx_temperature(model, mean);
}

}  // namespace tempspy
