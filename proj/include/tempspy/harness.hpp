#pragma once

// End-to-end attack in virtual time: a spy agent on the victim device measures
// decay once per cycle and ships flip counts over the wire; the collector turns
// them into temperatures and compares them to the ground truth.

#include "tempspy/countermeasures.hpp"
#include "tempspy/dram_sim.hpp"
#include "tempspy/enrollment.hpp"
#include "tempspy/error.hpp"
#include "tempspy/inference.hpp"
#include "tempspy/scenario.hpp"
#include "tempspy/transport.hpp"
#include "tempspy/wire.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

namespace tempspy {

/// Initialization plus read-out time for a region: 8 s at 256 KiBit, 60 s at
/// 2 MiB, linear in between and beyond.
inline double default_io_overhead_s(std::uint64_t region_size_bits) {
  constexpr double small_bits = 256.0 * 1024, large_bits = 16.0 * 1024 * 1024;
  constexpr double small_s = 8.0, large_s = 60.0;
  const double v = small_s + (static_cast<double>(region_size_bits) - small_bits) * (large_s - small_s) /
                                 (large_bits - small_bits);
  return std::max(0.0, v);
}

inline std::uint64_t to_millis(double seconds) {
  if (!(seconds >= 0) || !std::isfinite(seconds)) throw ArgumentError("durations must be finite and >= 0");
  return static_cast<std::uint64_t>(std::llround(seconds * 1000.0));
}

struct AgentConfig {
  std::string device_id = "dev0";
  std::string region_id = "r0";
  double decay_time_s = 120.0;
  /// Waiting time before each measurement, to stretch the cadence.
  double idle_s = 0.0;
  /// Defaults to default_io_overhead_s(region size).
  std::optional<double> io_overhead_s;
  CoverModel cover;
  DefensePolicy policy;
  MeasurePathway pathway = MeasurePathway::kernel_refresh_control;
  std::uint64_t spy_seed = 0;
  /// When set the agent decodes on the device and ships the grid level in
  /// place of the flip count.
  std::shared_ptr<const IndicatorCellSet> indicators;
};

/// Millisecond schedule of one agent cycle: idle, init, decay, read, send.
struct CycleTiming {
  std::uint64_t idle_ms = 0;
  std::uint64_t init_ms = 0;
  std::uint64_t decay_ms = 0;
  std::uint64_t read_ms = 0;

  std::uint64_t period_ms() const noexcept { return idle_ms + init_ms + decay_ms + read_ms; }

  static CycleTiming from(const AgentConfig& cfg, std::uint64_t region_size_bits) {
    if (!(cfg.decay_time_s > 0)) throw ArgumentError("agent decay time must be > 0");
    const std::uint64_t io_ms = to_millis(cfg.io_overhead_s.value_or(default_io_overhead_s(region_size_bits)));
    CycleTiming t;
    t.idle_ms = to_millis(cfg.idle_s);
    t.init_ms = io_ms / 2;
    t.read_ms = io_ms - t.init_ms;
    t.decay_ms = to_millis(cfg.decay_time_s);
    if (t.decay_ms == 0) throw ArgumentError("agent decay time below one millisecond");
    return t;
  }
};

class SpyAgent {
 public:
  SpyAgent(const CellArray& array, const ThermalTrack& track, double duration_s, AgentConfig cfg)
      : array_(array),
        track_(track),
        cfg_(std::move(cfg)),
        timing_(CycleTiming::from(cfg_, array.size_bits())),
        duration_ms_(to_millis(duration_s)) {
    cfg_.cover.validate();
    if (cfg_.indicators) {
      cfg_.indicators->validate();
      if (cfg_.indicators->region_size_bits != array.size_bits())
        throw ArgumentError("indicator set was enrolled on a region of a different size");
    }
  }

  const CycleTiming& timing() const noexcept { return timing_; }
  bool refused() const noexcept { return refusal_.has_value(); }
  const std::optional<DefenseRefusal>& refusal() const noexcept { return refusal_; }

  /// Next message, or nothing once the scenario is over or a defense stopped the agent.
  std::optional<SpyMessage> next() {
    if (refusal_) return std::nullopt;
    const std::uint64_t start = cycle_ * timing_.period_ms();
    const std::uint64_t send_at = start + timing_.period_ms();
    if (send_at > duration_ms_) return std::nullopt;
    const double t0 = static_cast<double>(start + timing_.idle_ms + timing_.init_ms) / 1000.0;
    const double t1 = t0 + static_cast<double>(timing_.decay_ms) / 1000.0;
    const auto& params = array_.params();
    const double t_eq =
        track_.decay_equivalent_temperature(t0, t1, params.k_true, params.ref_temp_c, cfg_.cover);
    const double decay_s = static_cast<double>(timing_.decay_ms) / 1000.0;
    auto outcome = guarded_decay_measure(cfg_.policy, array_, t_eq, decay_s,
                                         hash_combine(cfg_.spy_seed, cycle_), cfg_.pathway);
    if (auto* refusal = std::get_if<DefenseRefusal>(&outcome)) {
      refusal_ = *refusal;
      return std::nullopt;
    }
    const auto& bitmap = std::get<DecayBitmap>(outcome);
    SpyMessage msg;
    msg.seq = cycle_;
    msg.timestamp_ms = send_at;
    msg.device_id = cfg_.device_id;
    msg.region_id = cfg_.region_id;
    msg.decay_time_ms = timing_.decay_ms;
    msg.flip_count = cfg_.indicators ? decode_votes(indicator_votes(bitmap, *cfg_.indicators),
                                                    cfg_.indicators->temps).level
                                     : bitmap.size();
    ++cycle_;
    return msg;
  }

  /// Drives the agent to completion; returns the number of messages sent.
  std::size_t run(MessageSink& sink) {
    std::size_t sent = 0;
    while (auto msg = next()) {
      sink.send(*msg);
      ++sent;
    }
    sink.close();
    return sent;
  }

 private:
  const CellArray& array_;
  const ThermalTrack& track_;
  AgentConfig cfg_;
  CycleTiming timing_;
  std::uint64_t duration_ms_;
  std::uint64_t cycle_ = 0;
  std::optional<DefenseRefusal> refusal_;
};

struct TruthSample {
  double ambient_c = 0.0;
  double device_c = 0.0;
};

/// Collector-side access to the true temperatures of the simulated scenario.
/// The device truth is the mean bare device temperature over the decay window.
class GroundTruth {
 public:
  GroundTruth(const ThermalTrack& track, std::uint64_t read_ms) : track_(track), read_ms_(read_ms) {}

  TruthSample at(const SpyMessage& msg) const {
    const double end = static_cast<double>(msg.timestamp_ms - std::min(msg.timestamp_ms, read_ms_)) / 1000.0;
    const double start = std::max(0.0, end - static_cast<double>(msg.decay_time_ms) / 1000.0);
    return {track_.ambient_at(msg.timestamp_s()), track_.device_mean(start, end)};
  }

 private:
  const ThermalTrack& track_;
  std::uint64_t read_ms_;
};

struct CollectorConfig {
  enum class Mode { approx, indicator };
  Mode mode = Mode::approx;
  ApproxModel model;
  /// Enrollment grid for indicator mode; flip_count carries the level.
  std::vector<double> indicator_temps;
};

struct TraceRow {
  std::uint64_t timestamp_ms = 0;
  double ambient_true_c = 0.0;
  double device_true_c = 0.0;
  double inferred_c = 0.0;
  double abs_error_c = 0.0;

  double timestamp_s() const noexcept { return static_cast<double>(timestamp_ms) / 1000.0; }
  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct TemperatureTrace {
  std::string scenario;
  double device_lag_tau_s = 0.0;
  std::vector<TraceRow> rows;
  std::vector<std::uint64_t> missing_seqs;
  std::size_t rejected_lines = 0;
};

class Collector {
 public:
  Collector(CollectorConfig cfg, GroundTruth truth) : cfg_(std::move(cfg)), truth_(truth) {
    if (cfg_.mode == CollectorConfig::Mode::approx) cfg_.model.validate();
    else if (cfg_.indicator_temps.size() < 2) throw ArgumentError("indicator collector needs the enrollment grid");
  }

  /// Malformed lines are counted and skipped.
  void on_line(const std::string& line) {
    SpyMessage msg;
    try {
      msg = decode_message(line);
    } catch (const ParseError&) {
      ++trace_.rejected_lines;
      return;
    } catch (const VersionError&) {
      ++trace_.rejected_lines;
      return;
    }
    on_message(msg);
  }

  void on_message(const SpyMessage& msg) {
    if (next_seq_ && msg.seq < *next_seq_) {
      ++trace_.rejected_lines;
      return;
    }
    for (std::uint64_t s = next_seq_.value_or(0); s < msg.seq; ++s) trace_.missing_seqs.push_back(s);
    next_seq_ = msg.seq + 1;
    const auto truth = truth_.at(msg);
    TraceRow row;
    row.timestamp_ms = msg.timestamp_ms;
    row.ambient_true_c = truth.ambient_c;
    row.device_true_c = truth.device_c;
    row.inferred_c = infer(msg.flip_count);
    row.abs_error_c = std::abs(row.device_true_c - row.inferred_c);
    trace_.rows.push_back(row);
  }

  TemperatureTrace& trace() noexcept { return trace_; }

 private:
  double infer(std::uint64_t value) const {
    if (cfg_.mode == CollectorConfig::Mode::approx) return approx_temperature(cfg_.model, static_cast<double>(value));
    const auto level = std::min<std::uint64_t>(value, cfg_.indicator_temps.size() - 1);
    return cfg_.indicator_temps[level];
  }

  CollectorConfig cfg_;
  GroundTruth truth_;
  TemperatureTrace trace_;
  std::optional<std::uint64_t> next_seq_;
};

struct ScenarioRun {
  TemperatureTrace trace;
  std::size_t messages_sent = 0;
  std::optional<DefenseRefusal> refusal;
};

/// Agent and collector connected by the in-process loopback channel.
inline ScenarioRun run_scenario_detailed(const CellArray& array, const Scenario& scenario, const AgentConfig& agent_cfg,
                                         const CollectorConfig& collector_cfg) {
  const ThermalTrack track(scenario);
  SpyAgent agent(array, track, scenario.duration_s, agent_cfg);
  Collector collector(collector_cfg, GroundTruth(track, agent.timing().read_ms));
  LoopbackChannel channel;
  ScenarioRun run;
  while (auto msg = agent.next()) {
    channel.send(*msg);
    ++run.messages_sent;
    while (auto line = channel.receive()) collector.on_line(*line);
  }
  run.refusal = agent.refusal();
  run.trace = std::move(collector.trace());
  run.trace.scenario = scenario.name;
  run.trace.device_lag_tau_s = scenario.device_lag_tau_s;
  return run;
}

inline TemperatureTrace run_scenario(const CellArray& array, const Scenario& scenario, const AgentConfig& agent_cfg,
                                     const CollectorConfig& collector_cfg) {
  return run_scenario_detailed(array, scenario, agent_cfg, collector_cfg).trace;
}

/// Same as run_scenario, with the collector listening on a loopback TCP port
/// in a second thread.
inline TemperatureTrace run_scenario_tcp(const CellArray& array, const Scenario& scenario,
                                         const AgentConfig& agent_cfg, const CollectorConfig& collector_cfg) {
  const ThermalTrack track(scenario);
  SpyAgent agent(array, track, scenario.duration_s, agent_cfg);
  Collector collector(collector_cfg, GroundTruth(track, agent.timing().read_ms));
  TcpLineListener listener(0);
  std::exception_ptr server_error;
  std::thread server([&] {
    try {
      listener.serve(1, [&](const std::string& line) { collector.on_line(line); });
    } catch (...) {
      server_error = std::current_exception();
    }
  });
  try {
    TcpSink sink("127.0.0.1", listener.port());
    while (auto msg = agent.next()) sink.send(*msg);
    sink.close();
  } catch (...) {
    // Unblock a pending accept before rethrowing.
    boost::asio::ip::tcp::iostream poke("127.0.0.1", std::to_string(listener.port()));
    poke.close();
    server.join();
    throw;
  }
  server.join();
  if (server_error) std::rethrow_exception(server_error);
  auto trace = std::move(collector.trace());
  trace.scenario = scenario.name;
  trace.device_lag_tau_s = scenario.device_lag_tau_s;
  return trace;
}

inline std::string format_temp(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_trace_csv(std::ostream& out, const TemperatureTrace& trace, const std::string& meta_comment = {}) {
  if (!meta_comment.empty()) out << "# " << meta_comment << '\n';
  out << "timestamp_s,ambient_true_c,device_true_c,inferred_c,abs_error_c\n";
  for (const auto& r : trace.rows)
    out << format_millis(r.timestamp_ms) << ',' << format_temp(r.ambient_true_c) << ','
        << format_temp(r.device_true_c) << ',' << format_temp(r.inferred_c) << ',' << format_temp(r.abs_error_c)
        << '\n';
}

struct TraceFilter {
  std::optional<std::pair<double, double>> device_range;
  std::optional<std::pair<double, double>> ambient_range;

  bool accepts(const TraceRow& r) const {
    if (device_range && (r.device_true_c < device_range->first || r.device_true_c > device_range->second))
      return false;
    if (ambient_range && (r.ambient_true_c < ambient_range->first || r.ambient_true_c > ambient_range->second))
      return false;
    return true;
  }
};

struct TraceSummary {
  std::size_t rows = 0;
  double max_abs_error_c = 0.0;
  double mean_abs_error_c = 0.0;
  double p95_abs_error_c = 0.0;
  /// Shift (s) of the ambient series that best lines it up with the inferred
  /// series; positive means the inference trails the ambient.
  double lag_s = 0.0;
};

/// Nearest-rank percentile, q in (0, 1].
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

/// Cross-correlation lag between inferred and ambient series, searched in 1 s
/// steps over [-max_lag_s, max_lag_s]. The ambient series is interpolated
/// linearly between rows.
inline double estimate_lag_s(const TemperatureTrace& trace, double max_lag_s = 1800.0) {
  const auto& rows = trace.rows;
  if (rows.size() < 3) return 0.0;
  const double first = rows.front().timestamp_s(), last = rows.back().timestamp_s();
  auto ambient = [&](double t) {
    auto hi = std::lower_bound(rows.begin(), rows.end(), t,
                               [](const TraceRow& r, double v) { return r.timestamp_s() < v; });
    if (hi == rows.begin()) return hi->ambient_true_c;
    if (hi == rows.end()) return rows.back().ambient_true_c;
    auto lo = hi - 1;
    const double w = (t - lo->timestamp_s()) / (hi->timestamp_s() - lo->timestamp_s());
    return lo->ambient_true_c + w * (hi->ambient_true_c - lo->ambient_true_c);
  };
  double best_lag = 0.0, best_corr = -2.0;
  const int max_lag = static_cast<int>(std::floor(max_lag_s));
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (const auto& r : rows) {
      const double t = r.timestamp_s() - lag;
      if (t < first || t > last) continue;
      const double x = r.inferred_c, y = ambient(t);
      n += 1;
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
    }
    if (n < 3) continue;
    const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
    if (vx <= 1e-12 || vy <= 1e-12) continue;
    const double corr = (sxy - sx * sy / n) / std::sqrt(vx * vy);
    if (corr > best_corr + 1e-12) {
      best_corr = corr;
      best_lag = lag;
    }
  }
  return best_lag;
}

inline TraceSummary evaluate_trace(const TemperatureTrace& trace, const TraceFilter& filter = {}) {
  if (trace.rows.empty()) throw ArgumentError("cannot evaluate an empty trace");
  std::vector<double> errors;
  for (const auto& r : trace.rows)
    if (filter.accepts(r)) errors.push_back(r.abs_error_c);
  if (errors.empty()) throw ArgumentError("no trace rows inside the evaluation range");
  TraceSummary s;
  s.rows = errors.size();
  s.max_abs_error_c = *std::max_element(errors.begin(), errors.end());
  double sum = 0;
  for (double e : errors) sum += e;
  s.mean_abs_error_c = sum / static_cast<double>(errors.size());
  s.p95_abs_error_c = percentile(errors, 0.95);
  s.lag_s = estimate_lag_s(trace);
  return s;
}

/// Extrapolation factor from a single spy measurement at a known temperature.
inline double calibrate_p(const ApproxModel& model, const EnrollmentTable& table, const CellArray& spy_array,
                          double known_temp_c, std::uint64_t measurement_seed) {
  if (spy_array.size_bits() != model.region_size_bits)
    throw ArgumentError("spy region size differs from the enrolled region size");
  const auto bitmap = decay_measure(spy_array, known_temp_c, model.decay_time_s, measurement_seed);
  return compute_p(enrollment_count_at(table, model, known_temp_c), static_cast<double>(bitmap.size()));
}

}  // namespace tempspy
