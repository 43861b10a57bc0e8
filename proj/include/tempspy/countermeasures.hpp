#pragma once

// Defenses: refresh lockdown / zero-on-wake, and a thermal cover that shifts
// and stretches the temperature the DRAM actually experiences.

#include "tempspy/dram_sim.hpp"
#include "tempspy/error.hpp"

#include <cstdint>
#include <string>
#include <variant>

namespace tempspy {

/// Affine distortion of the device temperature caused by an enclosure.
struct CoverModel {
  double offset_c = 0.0;
  double slope_gain = 1.0;
  double ref_temp_c = 25.0;
  double self_heat_c = 0.0;

  static CoverModel identity() { return {}; }

  /// Synthetic box calibration: +2 C offset, 15 % slope gain, 1 C trapped self-heating.
  static CoverModel default_box() { return {2.0, 1.15, 25.0, 1.0}; }

  bool is_identity() const { return offset_c == 0.0 && slope_gain == 1.0 && self_heat_c == 0.0; }

  void validate() const {
    if (!(slope_gain > 0)) throw ConfigError("cover.slope_gain", "must be > 0");
  }
};

inline double effective_temperature(const CoverModel& cover, double ambient_c) {
  return ambient_c + cover.offset_c + cover.self_heat_c + (cover.slope_gain - 1.0) * (ambient_c - cover.ref_temp_c);
}

struct DefensePolicy {
  /// Kernel and firmware are protected; refresh cannot be disabled.
  bool refresh_locked = false;
  /// Memory is zeroed whenever it wakes from deep sleep.
  bool zero_on_wake = false;
};

/// How the attacker stops refresh.
enum class MeasurePathway {
  /// Compromised kernel/firmware turns refresh off.
  kernel_refresh_control,
  /// Region initialized, then the DRAM is sent to deep sleep (refresh off) and woken.
  sleep_mode,
};

struct DefenseRefusal {
  std::string reason;
};

using GuardedMeasurement = std::variant<DecayBitmap, DefenseRefusal>;

inline GuardedMeasurement guarded_decay_measure(const DefensePolicy& policy, const CellArray& array, double temp_c,
                                                double decay_time_s, std::uint64_t measurement_seed,
                                                MeasurePathway pathway = MeasurePathway::kernel_refresh_control) {
  // A locked refresh also blocks entering deep sleep, so both pathways are refused.
  if (policy.refresh_locked) return DefenseRefusal{"refresh is locked: kernel and firmware are protected"};
  if (pathway == MeasurePathway::sleep_mode && policy.zero_on_wake) {
    DecayBitmap zeroed;
    zeroed.region_size_bits = array.size_bits();
    zeroed.temp_c = temp_c;
    zeroed.decay_time_s = decay_time_s;
    zeroed.measurement_seed = measurement_seed;
    return zeroed;
  }
  return decay_measure(array, temp_c, decay_time_s, measurement_seed);
}

}  // namespace tempspy
