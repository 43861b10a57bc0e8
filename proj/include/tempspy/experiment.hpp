#pragma once

// Run configuration and the experiment pipeline shared by the command-line
// tool: one master seed fans out into named sub-streams ("array", "enroll",
// "spy", "scenario").

#include "tempspy/config.hpp"
#include "tempspy/countermeasures.hpp"
#include "tempspy/defense.hpp"
#include "tempspy/dram_sim.hpp"
#include "tempspy/enrollment.hpp"
#include "tempspy/error.hpp"
#include "tempspy/harness.hpp"
#include "tempspy/inference.hpp"
#include "tempspy/random.hpp"
#include "tempspy/scenario.hpp"
#include "tempspy/serialize.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tempspy {

struct RunConfig {
  std::uint64_t master_seed = 1;
  ModelParams model;

  std::uint64_t region_size_bits = 0;
  EnrollmentMode enroll_mode = EnrollmentMode::real_temperature;
  std::vector<double> enroll_temps;
  double enroll_decay_time_s = 240.0;
  std::size_t enroll_repeats = 1;
  std::size_t enroll_devices = 1;
  double enroll_at_temp_c = 25.0;
  double enroll_k = 0.07;
  std::vector<double> sweep_decay_times;
  double max_decay_time_s = 3600.0;

  std::vector<double> segments;

  std::vector<double> kfit_sim_temps;
  std::vector<double> kfit_real_decay_times;
  std::size_t kfit_sweep_points = 10;

  std::string scenario_name = "chamber-ramp";
  std::optional<std::string> scenario_file;
  double device_lag_tau_s = 180.0;
  bool indicator_mode = false;
  std::size_t l = 5;
  bool same_device = true;
  double spy_retention_scale = 1.0;
  double known_temp_c = 40.0;
  double idle_s = 0.0;
  std::optional<double> io_overhead_s;
  std::string device_id = "dev0";
  std::string region_id = "r0";
  TraceFilter eval_filter;

  CoverModel cover;
  bool cover_enabled = false;
  DefensePolicy policy;
  MeasurePathway pathway = MeasurePathway::kernel_refresh_control;

  std::string config_digest;

  ArtifactMeta meta() const { return {TEMPSPY_VERSION, master_seed, config_digest}; }
};

namespace detail {

inline std::vector<double> list_or(const KeyValueConfig& cfg, const std::string& key, const std::string& fallback) {
  return parse_number_list(key, cfg.get_string(key).value_or(fallback));
}

inline std::optional<std::pair<double, double>> range_or_none(const KeyValueConfig& cfg, const std::string& lo_key,
                                                              const std::string& hi_key) {
  if (!cfg.has(lo_key) && !cfg.has(hi_key)) return std::nullopt;
  const double lo = cfg.get_double(lo_key, -1e9), hi = cfg.get_double(hi_key, 1e9);
  if (!(hi >= lo)) throw ConfigError(hi_key, "must be >= " + lo_key);
  return std::make_pair(lo, hi);
}

inline std::size_t positive_count(const KeyValueConfig& cfg, const std::string& key, std::size_t fallback) {
  const auto v = cfg.get_u64(key, fallback);
  if (v == 0) throw ConfigError(key, "must be >= 1");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// `base_dir` resolves relative paths inside the config (the config file's directory).
inline RunConfig run_config_from(const KeyValueConfig& cfg, const std::filesystem::path& base_dir = {}) {
  RunConfig rc;
  rc.master_seed = cfg.get_u64("master_seed", rc.master_seed);
  rc.model = model_params_from(cfg, "model");

  if (!cfg.has("enroll.region_size")) throw ConfigError("enroll.region_size", "missing required key");
  try {
    rc.region_size_bits = parse_region_size_bits(cfg.require_string("enroll.region_size"));
  } catch (const ConfigError& e) {
    throw ConfigError("enroll.region_size", e.what());
  }
  const auto mode = cfg.get_string("enroll.mode").value_or("real-temperature");
  try {
    rc.enroll_mode = enrollment_mode_from_string(mode);
  } catch (const ArgumentError& e) {
    throw ConfigError("enroll.mode", e.what());
  }
  rc.enroll_temps = detail::list_or(cfg, "enroll.temps", "0:2.5:70");
  rc.enroll_decay_time_s = cfg.get_double("enroll.decay_time_s", rc.enroll_decay_time_s);
  if (!(rc.enroll_decay_time_s > 0)) throw ConfigError("enroll.decay_time_s", "must be > 0");
  rc.enroll_repeats = detail::positive_count(cfg, "enroll.repeats", rc.enroll_repeats);
  rc.enroll_devices = detail::positive_count(cfg, "enroll.devices", rc.enroll_devices);
  rc.enroll_at_temp_c = cfg.get_double("enroll.at_temp_c", rc.enroll_at_temp_c);
  rc.enroll_k = cfg.get_double("enroll.k", rc.enroll_k);
  if (!(rc.enroll_k > 0)) throw ConfigError("enroll.k", "must be > 0");
  if (cfg.has("enroll.sweep_decay_times"))
    rc.sweep_decay_times = parse_number_list("enroll.sweep_decay_times", cfg.require_string("enroll.sweep_decay_times"));
  rc.max_decay_time_s = cfg.get_double("enroll.max_decay_time_s", rc.max_decay_time_s);
  if (rc.enroll_mode == EnrollmentMode::decay_sweep && rc.sweep_decay_times.empty())
    throw ConfigError("enroll.sweep_decay_times", "required for decay-sweep enrollment");

  rc.segments = detail::list_or(cfg, "fit.segments", "0,25,45,70");

  rc.kfit_sim_temps = detail::list_or(cfg, "kfit.sim_temps", "25,30");
  rc.kfit_real_decay_times = detail::list_or(cfg, "kfit.real_decay_times", "60,120");
  rc.kfit_sweep_points = detail::positive_count(cfg, "kfit.sweep_points", rc.kfit_sweep_points);

  rc.scenario_name = cfg.get_string("attack.scenario").value_or(rc.scenario_name);
  if (auto file = cfg.get_string("attack.scenario_file")) {
    auto path = std::filesystem::path(*file);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    if (!std::filesystem::exists(path)) throw ConfigError("attack.scenario_file", "no such file '" + path.string() + "'");
    rc.scenario_file = path.string();
  }
  rc.device_lag_tau_s = cfg.get_double("attack.device_lag_tau_s", rc.device_lag_tau_s);
  if (!(rc.device_lag_tau_s >= 0)) throw ConfigError("attack.device_lag_tau_s", "must be >= 0");
  const auto attack_mode = cfg.get_string("attack.mode").value_or("approx");
  if (attack_mode != "approx" && attack_mode != "indicator")
    throw ConfigError("attack.mode", "expected 'approx' or 'indicator'");
  rc.indicator_mode = attack_mode == "indicator";
  rc.l = static_cast<std::size_t>(cfg.get_u64("attack.l", rc.l));
  if (rc.l < 3 || rc.l % 2 == 0) throw ConfigError("attack.l", "must be odd and >= 3");
  rc.same_device = cfg.get_bool("attack.same_device", rc.same_device);
  rc.spy_retention_scale = cfg.get_double("attack.spy_retention_scale", rc.spy_retention_scale);
  if (!(rc.spy_retention_scale > 0)) throw ConfigError("attack.spy_retention_scale", "must be > 0");
  rc.known_temp_c = cfg.get_double("attack.known_temp_c", rc.known_temp_c);
  rc.idle_s = cfg.get_double("attack.idle_s", rc.idle_s);
  if (!(rc.idle_s >= 0)) throw ConfigError("attack.idle_s", "must be >= 0");
  if (cfg.has("attack.io_overhead_s")) {
    rc.io_overhead_s = cfg.get_double("attack.io_overhead_s", 0.0);
    if (!(*rc.io_overhead_s >= 0)) throw ConfigError("attack.io_overhead_s", "must be >= 0");
  }
  rc.device_id = cfg.get_string("attack.device_id").value_or(rc.device_id);
  rc.region_id = cfg.get_string("attack.region_id").value_or(rc.region_id);
  if (!is_identifier(rc.device_id)) throw ConfigError("attack.device_id", "must be an identifier");
  if (!is_identifier(rc.region_id)) throw ConfigError("attack.region_id", "must be an identifier");
  rc.eval_filter.device_range = detail::range_or_none(cfg, "attack.eval_min_c", "attack.eval_max_c");

  rc.cover_enabled = cfg.get_bool("cover.enabled", rc.cover_enabled);
  const auto box = CoverModel::default_box();
  rc.cover.offset_c = cfg.get_double("cover.offset_c", box.offset_c);
  rc.cover.slope_gain = cfg.get_double("cover.slope_gain", box.slope_gain);
  rc.cover.ref_temp_c = cfg.get_double("cover.ref_temp_c", box.ref_temp_c);
  rc.cover.self_heat_c = cfg.get_double("cover.self_heat_c", box.self_heat_c);
  rc.cover.validate();

  rc.policy.refresh_locked = cfg.get_bool("policy.refresh_locked", false);
  rc.policy.zero_on_wake = cfg.get_bool("policy.zero_on_wake", false);
  const auto pathway = cfg.get_string("policy.pathway").value_or("kernel");
  if (pathway == "kernel") rc.pathway = MeasurePathway::kernel_refresh_control;
  else if (pathway == "sleep") rc.pathway = MeasurePathway::sleep_mode;
  else throw ConfigError("policy.pathway", "expected 'kernel' or 'sleep'");

  rc.config_digest = cfg.digest_hex();
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  const auto cfg = KeyValueConfig::from_file(path);
  return run_config_from(cfg, std::filesystem::path(path).parent_path());
}

inline CellArray build_enroll_array(const RunConfig& rc, std::size_t device = 0) {
  return CellArray::build(derive_seed(rc.master_seed, "array", device), rc.region_size_bits, rc.model);
}

/// The victim device: the (first) enrolled one, or a device outside the
/// enrollment set with scaled retention.
inline CellArray build_spy_array(const RunConfig& rc) {
  if (rc.same_device) return build_enroll_array(rc);
  ModelParams params = rc.model;
  params.retention_scale *= rc.spy_retention_scale;
  return CellArray::build(derive_seed(rc.master_seed, "array", rc.enroll_devices), rc.region_size_bits, params);
}

inline std::vector<std::uint64_t> enroll_seeds(const RunConfig& rc, std::uint64_t stream_index = 0) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < rc.enroll_repeats; ++r)
    seeds.push_back(derive_seed(derive_seed(rc.master_seed, "enroll", stream_index), "repeat", r));
  return seeds;
}

inline EnrollmentTable enroll_device(const RunConfig& rc, const CellArray& array, bool keep_bitmaps) {
  const auto seeds = enroll_seeds(rc);
  switch (rc.enroll_mode) {
    case EnrollmentMode::real_temperature:
      return enroll_real(array, rc.enroll_temps, rc.enroll_decay_time_s, seeds, keep_bitmaps);
    case EnrollmentMode::simulated_by_decay_time:
      return enroll_constant_temp(array, rc.enroll_decay_time_s, rc.enroll_temps, rc.enroll_at_temp_c, rc.enroll_k,
                                  seeds, rc.max_decay_time_s, keep_bitmaps);
    case EnrollmentMode::decay_sweep:
      return enroll_decay_sweep(array, rc.enroll_at_temp_c, rc.sweep_decay_times, rc.enroll_decay_time_s, seeds,
                                keep_bitmaps);
  }
  throw ArgumentError("unknown enrollment mode");
}

/// Enrolls `first` and, when enroll.devices > 1, further devices whose counts
/// are pooled into the same table.
inline EnrollmentTable run_enrollment(const RunConfig& rc, const CellArray& first, bool keep_bitmaps = true) {
  std::vector<EnrollmentTable> tables;
  tables.push_back(enroll_device(rc, first, keep_bitmaps));
  for (std::size_t d = 1; d < rc.enroll_devices; ++d)
    tables.push_back(enroll_device(rc, build_enroll_array(rc, d), false));
  return tables.size() == 1 ? std::move(tables.front()) : pool_tables(tables);
}

inline ApproxModel fit_model(const RunConfig& rc, const EnrollmentTable& table) {
  auto model = fit_approx_model(table, rc.segments, rc.enroll_k);
  model.enroll_device_id = "array:" + std::to_string(table.device_seed);
  return model;
}

/// Temperature-index estimation: a decay-time sweep at each simulation
/// temperature, matched against a real-temperature table at each real decay
/// time. Sweep times grow by sqrt(2) per point starting at sqrt(2) * t_real.
inline KFit run_kfit(const RunConfig& rc, const CellArray& array) {
  std::vector<std::pair<EnrollmentTable, EnrollmentTable>> pairs;
  std::uint64_t stream = 1;
  for (double t_real : rc.kfit_real_decay_times) {
    const auto real_seeds = enroll_seeds(rc, stream++);
    const auto real = enroll_real(array, rc.enroll_temps, t_real, real_seeds, false);
    for (double t_sim : rc.kfit_sim_temps) {
      std::vector<double> times;
      for (std::size_t i = 1; i <= rc.kfit_sweep_points; ++i)
        times.push_back(t_real * std::pow(2.0, 0.5 * static_cast<double>(i)));
      const auto sweep_seeds = enroll_seeds(rc, stream++);
      pairs.emplace_back(enroll_decay_sweep(array, t_sim, times, t_real, sweep_seeds, false), real);
    }
  }
  return fit_temperature_index(pairs);
}

inline Scenario load_scenario(const RunConfig& rc) {
  Scenario s;
  if (rc.scenario_file) {
    std::ifstream in(*rc.scenario_file);
    if (!in) throw ConfigError("attack.scenario_file", "cannot open '" + *rc.scenario_file + "'");
    s = read_scenario_csv(in, std::filesystem::path(*rc.scenario_file).stem().string());
  } else {
    try {
      s = builtin_scenario(rc.scenario_name);
    } catch (const ArgumentError& e) {
      throw ConfigError("attack.scenario", e.what());
    }
  }
  s.device_lag_tau_s = rc.device_lag_tau_s;
  s.validate();
  return s;
}

inline AgentConfig agent_config(const RunConfig& rc, std::shared_ptr<const IndicatorCellSet> indicators = nullptr) {
  AgentConfig a;
  a.device_id = rc.device_id;
  a.region_id = rc.region_id;
  a.decay_time_s = rc.enroll_decay_time_s;
  a.idle_s = rc.idle_s;
  a.io_overhead_s = rc.io_overhead_s;
  if (rc.cover_enabled) a.cover = rc.cover;
  a.policy = rc.policy;
  a.pathway = rc.pathway;
  a.spy_seed = derive_seed(rc.master_seed, "spy", 0);
  a.indicators = std::move(indicators);
  return a;
}

/// Everything the collector and the agent need for one attack.
struct AttackSetup {
  EnrollmentTable table;
  ApproxModel model;
  std::shared_ptr<const IndicatorCellSet> indicators;
  CellArray spy_array;
  Scenario scenario;
  AgentConfig agent;
  CollectorConfig collector;
};

inline AttackSetup prepare_attack(const RunConfig& rc) {
  const auto enroll_array = build_enroll_array(rc);
  auto table = run_enrollment(rc, enroll_array, rc.indicator_mode);
  ApproxModel model;
  std::shared_ptr<const IndicatorCellSet> indicators;
  CollectorConfig collector;
  auto spy = rc.same_device ? enroll_array : build_spy_array(rc);
  if (rc.indicator_mode) {
    indicators = std::make_shared<const IndicatorCellSet>(select_indicator_cells(table, rc.l));
    collector.mode = CollectorConfig::Mode::indicator;
    collector.indicator_temps = indicators->temps;
  } else {
    model = fit_model(rc, table);
    if (!rc.same_device)
      model.p = calibrate_p(model, table, spy, rc.known_temp_c, derive_seed(rc.master_seed, "spy", 1));
    collector.model = model;
  }
  auto agent = agent_config(rc, indicators);
  return {std::move(table), std::move(model), std::move(indicators), std::move(spy), load_scenario(rc),
          std::move(agent), std::move(collector)};
}

}  // namespace tempspy
