#pragma once

// Enrollment tables, temperature-index estimation and the validation metrics
// (Jaccard index, indicator-cell bit error rate).

#include "tempspy/dram_sim.hpp"
#include "tempspy/error.hpp"
#include "tempspy/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tempspy {

enum class EnrollmentMode {
  /// One measurement per temperature at a fixed decay time.
  real_temperature,
  /// Constant temperature; decay times stretched by exp(k dT) to stand in for other temperatures.
  simulated_by_decay_time,
  /// Constant temperature, arbitrary decay times, no k assumed (input to estimate_k).
  decay_sweep,
};

inline const char* to_string(EnrollmentMode mode) {
  switch (mode) {
    case EnrollmentMode::real_temperature: return "real-temperature";
    case EnrollmentMode::simulated_by_decay_time: return "simulated-by-decay-time";
    case EnrollmentMode::decay_sweep: return "decay-sweep";
  }
  return "?";
}

inline EnrollmentMode enrollment_mode_from_string(const std::string& s) {
  if (s == "real-temperature") return EnrollmentMode::real_temperature;
  if (s == "simulated-by-decay-time") return EnrollmentMode::simulated_by_decay_time;
  if (s == "decay-sweep") return EnrollmentMode::decay_sweep;
  throw ArgumentError("unknown enrollment mode '" + s + "'");
}

struct EnrollmentRecord {
  double nominal_temp_c = 0.0;
  double decay_time_s = 0.0;
  std::size_t flip_count = 0;
  /// First repetition; flip_count == bitmap->size() when present.
  std::optional<DecayBitmap> bitmap;
  /// Further repetitions under identical conditions.
  std::vector<DecayBitmap> repeats;
  /// Flip counts of all repetitions (first entry == flip_count).
  std::vector<std::size_t> repeat_counts;

  double mean_flip_count() const {
    if (repeat_counts.empty()) return static_cast<double>(flip_count);
    double sum = 0;
    for (auto c : repeat_counts) sum += static_cast<double>(c);
    return sum / static_cast<double>(repeat_counts.size());
  }
};

struct EnrollmentTable {
  std::vector<EnrollmentRecord> records;
  double base_decay_time_s = 0.0;
  EnrollmentMode mode = EnrollmentMode::real_temperature;
  std::optional<double> k_used;
  /// The constant temperature of simulated/sweep tables.
  std::optional<double> enroll_temp_c;
  std::uint64_t region_size_bits = 0;
  std::uint64_t device_seed = 0;

  void validate() const {
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (!std::isfinite(r.nominal_temp_c)) throw ArgumentError("record temperature must be finite");
      if (r.bitmap && r.bitmap->size() != r.flip_count) throw ArgumentError("flip_count != |bitmap|");
      if (i == 0) continue;
      if (mode == EnrollmentMode::decay_sweep) {
        if (!(r.decay_time_s > records[i - 1].decay_time_s))
          throw ArgumentError("decay-sweep records must have strictly increasing decay times");
      } else if (!(r.nominal_temp_c > records[i - 1].nominal_temp_c)) {
        throw ArgumentError("enrollment temperatures must be strictly increasing");
      }
    }
    if (mode == EnrollmentMode::simulated_by_decay_time) {
      if (!k_used || !enroll_temp_c) throw ArgumentError("simulated table needs k_used and enroll_temp_c");
      for (const auto& r : records) {
        const double expected = base_decay_time_s * std::exp(*k_used * (r.nominal_temp_c - *enroll_temp_c));
        if (std::abs(expected - r.decay_time_s) > 1.0)
          throw ArgumentError("simulated record decay time inconsistent with k_used");
      }
    }
  }

  std::vector<double> temperatures() const {
    std::vector<double> out;
    for (const auto& r : records) out.push_back(r.nominal_temp_c);
    return out;
  }
};

namespace detail {

inline EnrollmentRecord measure_record(const CellArray& array, double measure_temp_c, double nominal_temp_c,
                                       double decay_time_s, std::span<const std::uint64_t> seeds,
                                       std::uint64_t record_index, bool keep_bitmaps) {
  EnrollmentRecord rec;
  rec.nominal_temp_c = nominal_temp_c;
  rec.decay_time_s = decay_time_s;
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    auto bitmap = decay_measure(array, measure_temp_c, decay_time_s, hash_combine(seeds[r], record_index));
    rec.repeat_counts.push_back(bitmap.size());
    if (r == 0) {
      rec.flip_count = bitmap.size();
      if (keep_bitmaps) rec.bitmap = std::move(bitmap);
    } else if (keep_bitmaps) {
      rec.repeats.push_back(std::move(bitmap));
    }
  }
  return rec;
}

inline void check_seeds(std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw ArgumentError("at least one measurement seed (repetition) is required");
}

inline void check_strictly_increasing(std::span<const double> values, const char* what) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1])) throw ArgumentError(std::string(what) + " must be strictly increasing");
}

}  // namespace detail

/// Enrollment at a fixed decay time across several real temperatures.
/// `seeds` holds one measurement seed per repetition.
inline EnrollmentTable enroll_real(const CellArray& array, std::span<const double> temps, double decay_time_s,
                                   std::span<const std::uint64_t> seeds, bool keep_bitmaps = true) {
  if (temps.size() < 2) throw ArgumentError("real-temperature enrollment needs at least 2 temperatures");
  detail::check_strictly_increasing(temps, "enrollment temperatures");
  detail::check_seeds(seeds);
  if (!(decay_time_s > 0)) throw ArgumentError("decay time must be > 0");
  EnrollmentTable table;
  table.mode = EnrollmentMode::real_temperature;
  table.base_decay_time_s = decay_time_s;
  table.region_size_bits = array.size_bits();
  table.device_seed = array.seed();
  for (std::size_t i = 0; i < temps.size(); ++i)
    table.records.push_back(
        detail::measure_record(array, temps[i], temps[i], decay_time_s, seeds, i, keep_bitmaps));
  return table;
}

/// Decay time that stands in for `target_temp_c` when measuring at `at_temp_c`.
inline double simulated_decay_time(double t_real_s, double target_temp_c, double at_temp_c, double k) {
  return t_real_s * std::exp(k * (target_temp_c - at_temp_c));
}

/// Enrollment at one constant temperature, stretching the decay time to stand in
/// for each target temperature.
inline EnrollmentTable enroll_constant_temp(const CellArray& array, double t0_s, std::span<const double> target_temps,
                                            double at_temp_c, double k, std::span<const std::uint64_t> seeds,
                                            double max_decay_time_s = 3600.0, bool keep_bitmaps = true) {
  if (!(k > 0)) throw ArgumentError("k must be > 0");
  if (!(t0_s > 0)) throw ArgumentError("t0 must be > 0");
  if (target_temps.empty()) throw ArgumentError("no target temperatures");
  detail::check_strictly_increasing(target_temps, "target temperatures");
  detail::check_seeds(seeds);
  EnrollmentTable table;
  table.mode = EnrollmentMode::simulated_by_decay_time;
  table.base_decay_time_s = t0_s;
  table.k_used = k;
  table.enroll_temp_c = at_temp_c;
  table.region_size_bits = array.size_bits();
  table.device_seed = array.seed();
  for (double target : target_temps) {
    const double t = simulated_decay_time(t0_s, target, at_temp_c, k);
    if (t > max_decay_time_s)
      throw RangeError("simulating " + std::to_string(target) + " C needs a decay time of " + std::to_string(t) +
                       " s, above the configured maximum of " + std::to_string(max_decay_time_s) + " s");
  }
  for (std::size_t i = 0; i < target_temps.size(); ++i) {
    const double t = simulated_decay_time(t0_s, target_temps[i], at_temp_c, k);
    table.records.push_back(detail::measure_record(array, at_temp_c, target_temps[i], t, seeds, i, keep_bitmaps));
  }
  return table;
}

/// Measurements at one constant temperature over a list of decay times, with no
/// temperature index assumed. `t_real_s` is the decay time the sweep is meant to
/// stand in for.
inline EnrollmentTable enroll_decay_sweep(const CellArray& array, double at_temp_c, std::span<const double> decay_times,
                                          double t_real_s, std::span<const std::uint64_t> seeds,
                                          bool keep_bitmaps = false) {
  if (decay_times.empty()) throw ArgumentError("no decay times");
  detail::check_strictly_increasing(decay_times, "decay times");
  detail::check_seeds(seeds);
  EnrollmentTable table;
  table.mode = EnrollmentMode::decay_sweep;
  table.base_decay_time_s = t_real_s;
  table.enroll_temp_c = at_temp_c;
  table.region_size_bits = array.size_bits();
  table.device_seed = array.seed();
  for (std::size_t i = 0; i < decay_times.size(); ++i)
    table.records.push_back(
        detail::measure_record(array, at_temp_c, at_temp_c, decay_times[i], seeds, i, keep_bitmaps));
  return table;
}

/// Pools enrollments of several devices taken under identical conditions.
/// Each record's repeat_counts holds every device's counts, so
/// mean_flip_count() is the cross-device average; bitmaps come from the first table.
inline EnrollmentTable pool_tables(std::span<const EnrollmentTable> tables) {
  if (tables.empty()) throw ArgumentError("no tables to pool");
  EnrollmentTable pooled = tables.front();
  for (std::size_t t = 1; t < tables.size(); ++t) {
    const auto& other = tables[t];
    if (other.mode != pooled.mode || other.records.size() != pooled.records.size() ||
        other.region_size_bits != pooled.region_size_bits || other.base_decay_time_s != pooled.base_decay_time_s)
      throw ArgumentError("pooled tables must share mode, grid, region size and decay time");
    for (std::size_t i = 0; i < pooled.records.size(); ++i) {
      auto& rec = pooled.records[i];
      const auto& o = other.records[i];
      if (o.nominal_temp_c != rec.nominal_temp_c || o.decay_time_s != rec.decay_time_s)
        throw ArgumentError("pooled tables must share mode, grid, region size and decay time");
      rec.repeat_counts.insert(rec.repeat_counts.end(), o.repeat_counts.begin(), o.repeat_counts.end());
    }
  }
  return pooled;
}

struct KPair {
  double sim_decay_time_s;
  double real_decay_time_s;
  double delta_temp_c;  // matched T_real - T_sim
};

struct KFit {
  double k = 0.0;
  std::vector<KPair> pairs;
};

/// Pairs every sweep measurement with the real measurement of closest flip
/// count (ties go to the lower temperature), then fits
/// ln(t_sim / t_real) = k * dT through the origin. Sweep counts outside the
/// real table's count range are left unmatched.
inline KFit fit_temperature_index(std::span<const std::pair<EnrollmentTable, EnrollmentTable>> sim_real_pairs) {
  KFit fit;
  for (const auto& [sim, real] : sim_real_pairs) {
    if (sim.records.empty() || real.records.empty()) throw InsufficientDataError("empty enrollment table");
    if (real.mode != EnrollmentMode::real_temperature)
      throw ArgumentError("second table must be a real-temperature enrollment");
    if (!sim.enroll_temp_c) throw ArgumentError("first table must be taken at a constant temperature");
    std::size_t lo = real.records.front().flip_count, hi = lo;
    for (const auto& r : real.records) {
      lo = std::min(lo, r.flip_count);
      hi = std::max(hi, r.flip_count);
    }
    for (const auto& s : sim.records) {
      if (s.flip_count < lo || s.flip_count > hi) continue;
      const EnrollmentRecord* best = nullptr;
      std::size_t best_gap = 0;
      for (const auto& r : real.records) {
        const std::size_t gap = r.flip_count > s.flip_count ? r.flip_count - s.flip_count : s.flip_count - r.flip_count;
        if (!best || gap < best_gap) {
          best = &r;
          best_gap = gap;
        }
      }
      fit.pairs.push_back({s.decay_time_s, real.base_decay_time_s, best->nominal_temp_c - *sim.enroll_temp_c});
    }
  }
  if (fit.pairs.size() < 3)
    throw InsufficientDataError("temperature index fit needs at least 3 matched pairs, got " +
                                std::to_string(fit.pairs.size()));
  double sxy = 0, sxx = 0;
  for (const auto& p : fit.pairs) {
    sxy += p.delta_temp_c * std::log(p.sim_decay_time_s / p.real_decay_time_s);
    sxx += p.delta_temp_c * p.delta_temp_c;
  }
  if (sxx == 0) throw InsufficientDataError("all matched pairs have zero temperature offset");
  fit.k = sxy / sxx;
  return fit;
}

inline double estimate_k(const EnrollmentTable& sim_table, const EnrollmentTable& real_table) {
  const std::pair<EnrollmentTable, EnrollmentTable> pair{sim_table, real_table};
  return fit_temperature_index(std::span(&pair, 1)).k;
}

inline double estimate_k(std::span<const std::pair<EnrollmentTable, EnrollmentTable>> sim_real_pairs) {
  return fit_temperature_index(sim_real_pairs).k;
}

inline std::size_t intersection_size(const DecayBitmap& a, const DecayBitmap& b) {
  std::size_t n = 0;
  auto i = a.flipped.begin(), j = b.flipped.begin();
  while (i != a.flipped.end() && j != b.flipped.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

/// |A n B| / |A u B|; 1 when both are empty.
inline double jaccard(const DecayBitmap& a, const DecayBitmap& b) {
  if (a.region_size_bits != b.region_size_bits) throw ArgumentError("jaccard: region sizes differ");
  const std::size_t inter = intersection_size(a, b);
  const std::size_t uni = a.size() + b.size() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Cells that flip at the upper temperature but not at the lower one.
inline std::vector<std::uint64_t> candidate_cells(const DecayBitmap& lo, const DecayBitmap& hi) {
  std::vector<std::uint64_t> out;
  std::set_difference(hi.flipped.begin(), hi.flipped.end(), lo.flipped.begin(), lo.flipped.end(),
                      std::back_inserter(out));
  return out;
}

/// Fraction of candidate indicator cells (from the enrollment pair) that flip in
/// the lower spy measurement or stay intact in the upper one.
inline double compute_ber(const DecayBitmap& enroll_lo, const DecayBitmap& enroll_hi, const DecayBitmap& spy_lo,
                          const DecayBitmap& spy_hi) {
  const auto n = enroll_lo.region_size_bits;
  if (enroll_hi.region_size_bits != n || spy_lo.region_size_bits != n || spy_hi.region_size_bits != n)
    throw ArgumentError("compute_ber: region sizes differ");
  const auto candidates = candidate_cells(enroll_lo, enroll_hi);
  if (candidates.empty())
    throw UndefinedBerError("no candidate indicator cells; use a larger DRAM region or a longer decay time");
  std::size_t errors = 0;
  for (auto cell : candidates)
    if (spy_lo.contains(cell) || !spy_hi.contains(cell)) ++errors;
  return static_cast<double>(errors) / static_cast<double>(candidates.size());
}

}  // namespace tempspy
