#pragma once

// Seed-deterministic model of a DRAM region whose charged cells decay once
// refresh is disabled.
//
// Cell i flips during a measurement at temperature T after decay time t iff it
// is charged and
//
//     t >= retention_ref[i] * exp(-k_true * (T - ref_temp)) * jitter(i, seed)
//
// where retention_ref is log-normal at the reference temperature and jitter is
// a mean-one log-normal factor drawn per (cell, measurement seed). Working in
// the log domain the condition reads
//
//     ln retention_ref[i] + ln jitter <= ln t + k_true * (T - ref_temp)
//
// so a shift of the temperature by dT is exactly a scaling of t by
// exp(k_true * dT).

#include "tempspy/error.hpp"
#include "tempspy/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace tempspy {

inline constexpr double kMinTempC = -20.0;
inline constexpr double kMaxTempC = 90.0;

/// Physical parameters of a simulated DRAM region. Defaults come from the
/// calibration sweep documented in README.md.
struct ModelParams {
  double ref_temp_c = 25.0;
  /// Temperature index in 1/C.
  double k_true = 0.07;
  /// Mean and standard deviation of ln(retention seconds) at ref_temp_c.
  double retention_log_mean = 18.93;
  double retention_log_sigma = 4.0;
  /// Device-to-device multiplier on every retention time.
  double retention_scale = 1.0;
  /// Log-domain jitter sigma at noise_ref_time_s of decay. The effective
  /// sigma for a decay time t is noise_sigma * (noise_ref_time_s / t)^noise_time_exponent.
  double noise_sigma = 0.006;
  double noise_ref_time_s = 120.0;
  double noise_time_exponent = 0.5;
  double charged_probability = 0.5;
  /// Cells that cannot flip within this decay time at kMaxTempC are kept out
  /// of the sorted weak-cell cache. Longer measurements fall back to a full scan.
  double weak_cache_time_s = 3600.0;

  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(ref_temp_c)) throw ConfigError("ref_temp_c", "must be finite");
    if (!finite(k_true) || k_true <= 0) throw ConfigError("k_true", "must be > 0");
    if (!finite(retention_log_mean)) throw ConfigError("retention_log_mean", "must be finite");
    if (!finite(retention_log_sigma) || retention_log_sigma <= 0)
      throw ConfigError("retention_log_sigma", "must be finite and > 0");
    if (!finite(retention_scale) || retention_scale <= 0)
      throw ConfigError("retention_scale", "must be finite and > 0");
    if (!finite(noise_sigma) || noise_sigma < 0) throw ConfigError("noise_sigma", "must be >= 0");
    if (!finite(noise_ref_time_s) || noise_ref_time_s <= 0)
      throw ConfigError("noise_ref_time_s", "must be > 0");
    if (!finite(noise_time_exponent) || noise_time_exponent < 0)
      throw ConfigError("noise_time_exponent", "must be >= 0");
    if (!(charged_probability >= 0 && charged_probability <= 1))
      throw ConfigError("charged_probability", "must lie in [0, 1]");
    if (!finite(weak_cache_time_s) || weak_cache_time_s <= 0)
      throw ConfigError("weak_cache_time_s", "must be > 0");
  }

  /// Jitter sigma applied to a measurement of the given decay time.
  double effective_noise_sigma(double decay_time_s) const {
    if (noise_sigma == 0.0 || noise_time_exponent == 0.0) return noise_sigma;
    return noise_sigma * std::pow(noise_ref_time_s / decay_time_s, noise_time_exponent);
  }
};

/// Flipped cells of one decay measurement.
struct DecayBitmap {
  std::vector<std::uint64_t> flipped;  // strictly increasing
  std::uint64_t region_size_bits = 0;
  double temp_c = 0.0;
  double decay_time_s = 0.0;
  std::uint64_t measurement_seed = 0;

  std::size_t size() const noexcept { return flipped.size(); }
  bool empty() const noexcept { return flipped.empty(); }

  bool contains(std::uint64_t cell) const {
    return std::binary_search(flipped.begin(), flipped.end(), cell);
  }

  void validate() const {
    for (std::size_t i = 0; i < flipped.size(); ++i) {
      if (flipped[i] >= region_size_bits) throw ArgumentError("bitmap index out of region");
      if (i > 0 && flipped[i] <= flipped[i - 1])
        throw ArgumentError("bitmap indices must be strictly increasing");
    }
  }

  friend bool operator==(const DecayBitmap&, const DecayBitmap&) = default;
};

inline std::size_t count_flips(const DecayBitmap& bitmap) noexcept { return bitmap.flipped.size(); }

/// Immutable simulated DRAM region. Per-cell properties are pure functions of
/// (seed, index); only the weakest cells are materialized, sorted by retention.
class CellArray {
 public:
  static CellArray build(std::uint64_t seed, std::uint64_t size_bits, const ModelParams& params) {
    if (size_bits < 1) throw ConfigError("size_bits", "must be >= 1");
    params.validate();
    CellArray array(seed, size_bits, params);
    array.populate();
    return array;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t size_bits() const noexcept { return size_bits_; }
  const ModelParams& params() const noexcept { return params_; }
  std::uint64_t charged_count() const noexcept { return charged_count_; }

  bool charged(std::uint64_t cell) const noexcept {
    return to_unit(hash_combine(polarity_seed_, cell)) < params_.charged_probability;
  }

  /// ln(retention seconds) at ref_temp_c; only meaningful for charged cells.
  double log_retention(std::uint64_t cell) const {
    return log_retention_from_unit(retention_unit(cell));
  }

  std::optional<double> retention_ref_s(std::uint64_t cell) const {
    if (cell >= size_bits_ || !charged(cell)) return std::nullopt;
    return std::exp(log_retention(cell));
  }

  /// Log-domain jitter of `cell` for a measurement with the given seed and sigma.
  static double log_jitter(std::uint64_t measurement_seed, std::uint64_t cell, double sigma) {
    if (sigma == 0.0) return 0.0;
    const double z = normal_quantile(to_unit(hash_combine(measurement_seed ^ kJitterDomain, cell)));
    return sigma * z - 0.5 * sigma * sigma;
  }

  /// Cells whose threshold ln retention + ln jitter is at most `log_equiv_time`,
  /// i.e. cells that flip after exp(log_equiv_time) seconds at ref_temp_c.
  std::vector<std::uint64_t> flipped_cells(double log_equiv_time, double jitter_sigma,
                                           std::uint64_t measurement_seed) const {
    std::vector<std::uint64_t> out;
    if (log_equiv_time == -std::numeric_limits<double>::infinity()) return out;
    const double slack = jitter_sigma * max_abs_normal_draw() + 0.5 * jitter_sigma * jitter_sigma;
    const double bound = log_equiv_time + slack;
    auto flips = [&](std::uint64_t cell, double log_ret) {
      return log_ret + log_jitter(measurement_seed, cell, jitter_sigma) <= log_equiv_time;
    };
    if (bound <= weak_log_cap_) {
      for (const auto& weak : weak_) {
        if (weak.log_retention > bound) break;
        if (flips(weak.index, weak.log_retention)) out.push_back(weak.index);
      }
      std::sort(out.begin(), out.end());
      return out;
    }
    const double unit_bound = unit_threshold(bound);
    for (std::uint64_t cell = 0; cell < size_bits_; ++cell) {
      if (!charged(cell)) continue;
      const double u = retention_unit(cell);
      if (u > unit_bound) continue;
      if (flips(cell, log_retention_from_unit(u))) out.push_back(cell);
    }
    return out;
  }

  friend bool operator==(const CellArray& a, const CellArray& b) {
    return a.seed_ == b.seed_ && a.size_bits_ == b.size_bits_ &&
           a.charged_count_ == b.charged_count_ && a.weak_ == b.weak_;
  }

 private:
  static constexpr std::uint64_t kPolarityDomain = 0x706f6c6172697479ULL;
  static constexpr std::uint64_t kRetentionDomain = 0x726574656e74696fULL;
  static constexpr std::uint64_t kJitterDomain = 0x6a69747465720000ULL;

  struct WeakCell {
    double log_retention;
    std::uint64_t index;
    friend bool operator==(const WeakCell&, const WeakCell&) = default;
  };

  CellArray(std::uint64_t seed, std::uint64_t size_bits, const ModelParams& params)
      : seed_(seed),
        size_bits_(size_bits),
        params_(params),
        polarity_seed_(hash_combine(seed, kPolarityDomain)),
        retention_seed_(hash_combine(seed, kRetentionDomain)),
        log_scale_(std::log(params.retention_scale)) {}

  double retention_unit(std::uint64_t cell) const noexcept {
    return to_unit(hash_combine(retention_seed_, cell));
  }

  double log_retention_from_unit(double u) const {
    return params_.retention_log_mean + params_.retention_log_sigma * normal_quantile(u) + log_scale_;
  }

  /// Loose upper bound on the uniform draw of any cell with ln retention <= log_ret.
  double unit_threshold(double log_ret) const {
    const double z = (log_ret - log_scale_ - params_.retention_log_mean) / params_.retention_log_sigma;
    return std::min(1.0, normal_cdf(z) * (1.0 + 1e-9) + 1e-300);
  }

  void populate() {
    weak_log_cap_ = std::log(params_.weak_cache_time_s) + params_.k_true * (kMaxTempC - params_.ref_temp_c);
    const double unit_cap = unit_threshold(weak_log_cap_);
    std::uint64_t charged_cells = 0;
    for (std::uint64_t cell = 0; cell < size_bits_; ++cell) {
      if (!charged(cell)) continue;
      ++charged_cells;
      const double u = retention_unit(cell);
      if (u > unit_cap) continue;
      const double log_ret = log_retention_from_unit(u);
      if (log_ret <= weak_log_cap_) weak_.push_back({log_ret, cell});
    }
    charged_count_ = charged_cells;
    std::sort(weak_.begin(), weak_.end(), [](const WeakCell& a, const WeakCell& b) {
      return a.log_retention < b.log_retention || (a.log_retention == b.log_retention && a.index < b.index);
    });
  }

  std::uint64_t seed_;
  std::uint64_t size_bits_;
  ModelParams params_;
  std::uint64_t polarity_seed_;
  std::uint64_t retention_seed_;
  double log_scale_;
  double weak_log_cap_ = 0.0;
  std::uint64_t charged_count_ = 0;
  std::vector<WeakCell> weak_;
};

inline void check_temperature(double temp_c) {
  if (!(temp_c >= kMinTempC && temp_c <= kMaxTempC))
    throw RangeError("temperature " + std::to_string(temp_c) + " C outside simulator validity range [" +
                     std::to_string(kMinTempC) + ", " + std::to_string(kMaxTempC) + "]");
}

/// One decay measurement: initialize, disable refresh for decay_time_s at temp_c, read back.
inline DecayBitmap decay_measure(const CellArray& array, double temp_c, double decay_time_s,
                                 std::uint64_t measurement_seed) {
  check_temperature(temp_c);
  if (!(decay_time_s >= 0) || !std::isfinite(decay_time_s))
    throw ArgumentError("decay time must be finite and >= 0");
  DecayBitmap bitmap;
  bitmap.region_size_bits = array.size_bits();
  bitmap.temp_c = temp_c;
  bitmap.decay_time_s = decay_time_s;
  bitmap.measurement_seed = measurement_seed;
  if (decay_time_s == 0.0) return bitmap;
  const auto& p = array.params();
  const double log_equiv = std::log(decay_time_s) + p.k_true * (temp_c - p.ref_temp_c);
  bitmap.flipped = array.flipped_cells(log_equiv, p.effective_noise_sigma(decay_time_s), measurement_seed);
  return bitmap;
}

}  // namespace tempspy
