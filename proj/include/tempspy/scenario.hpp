#pragma once

// Ambient temperature scenarios and the first-order thermal lag of the DRAM
// behind the ambient. All time is virtual (seconds since scenario start).

#include "tempspy/countermeasures.hpp"
#include "tempspy/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace tempspy {

struct Breakpoint {
  double time_s = 0.0;
  double temp_c = 0.0;
};

struct Scenario {
  std::string name;
  /// Linearly interpolated, held constant outside the first/last breakpoint.
  std::vector<Breakpoint> schedule;
  double duration_s = 0.0;
  double device_lag_tau_s = 180.0;

  void validate() const {
    if (schedule.empty()) throw ArgumentError("scenario '" + name + "' has no breakpoints");
    for (std::size_t i = 1; i < schedule.size(); ++i)
      if (!(schedule[i].time_s > schedule[i - 1].time_s))
        throw ArgumentError("scenario breakpoint times must be strictly increasing");
    if (duration_s < schedule.back().time_s) throw ArgumentError("scenario duration shorter than its schedule");
    if (!(device_lag_tau_s >= 0)) throw ArgumentError("device lag must be >= 0");
  }

  double ambient_at(double t) const {
    if (t <= schedule.front().time_s) return schedule.front().temp_c;
    if (t >= schedule.back().time_s) return schedule.back().temp_c;
    auto hi = std::upper_bound(schedule.begin(), schedule.end(), t,
                               [](double v, const Breakpoint& b) { return v < b.time_s; });
    auto lo = hi - 1;
    const double w = (t - lo->time_s) / (hi->time_s - lo->time_s);
    return lo->temp_c + w * (hi->temp_c - lo->temp_c);
  }
};

namespace detail {

inline Scenario constant_scenario(double temp_c, double duration_s) {
  return {"constant", {{0.0, temp_c}, {duration_s, temp_c}}, duration_s, 180.0};
}

// Synthetic stand-in for a lived-in room: slow day/night swing plus occupancy
// bumps in the morning, at lunch and in the evening. Every 15 min.
inline Scenario room_daynight() {
  Scenario s{"room-daynight", {}, 86400.0, 180.0};
  auto bump = [](double hour, double center, double width, double height) {
    const double d = (hour - center) / width;
    return height * std::exp(-0.5 * d * d);
  };
  for (int i = 0; i <= 96; ++i) {
    const double hour = i * 0.25;
    double temp = 21.0 + 0.8 * std::sin(2.0 * std::numbers::pi * (hour - 9.0) / 24.0);
    temp += bump(hour, 7.5, 0.5, 1.2) + bump(hour, 12.5, 0.4, 0.8) + bump(hour, 19.5, 1.2, 1.0);
    s.schedule.push_back({hour * 3600.0, std::round(temp * 100.0) / 100.0});
  }
  return s;
}

// Idle rack at 24 C; each job heats the rack for 25 min, then the fans
// overshoot the room down before it settles.
inline Scenario server_workload() {
  Scenario s{"server-workload", {}, 6.0 * 3600.0, 180.0};
  s.schedule.push_back({0.0, 24.0});
  for (double start : {1800.0, 7200.0, 12600.0, 18000.0}) {
    s.schedule.push_back({start, 24.0});
    s.schedule.push_back({start + 10.0, 31.0});
    s.schedule.push_back({start + 1500.0, 31.0});
    s.schedule.push_back({start + 1510.0, 22.0});
    s.schedule.push_back({start + 2100.0, 22.0});
    s.schedule.push_back({start + 2110.0, 24.0});
  }
  s.schedule.push_back({s.duration_s, 24.0});
  return s;
}

// Climate-chamber program: slow and fast ramps, holds and small wiggles over 25-70 C.
inline Scenario chamber_ramp() {
  Scenario s{"chamber-ramp", {}, 0.0, 180.0};
  const double minutes_temps[][2] = {
      {0, 25},   {30, 25},  {90, 40},  {120, 40}, {125, 41}, {130, 40}, {135, 41}, {140, 40},
      {200, 55}, {230, 55}, {260, 70}, {290, 70}, {350, 45}, {370, 45}, {375, 46}, {380, 45},
      {420, 35}, {435, 30}, {465, 30}, {475, 25}, {510, 25}};
  for (const auto& mt : minutes_temps) s.schedule.push_back({mt[0] * 60.0, mt[1]});
  s.duration_s = s.schedule.back().time_s;
  return s;
}

}  // namespace detail

inline std::vector<std::string> builtin_scenario_names() {
  return {"room-daynight", "server-workload", "chamber-ramp"};
}

inline Scenario builtin_scenario(const std::string& name) {
  if (name == "room-daynight") return detail::room_daynight();
  if (name == "server-workload") return detail::server_workload();
  if (name == "chamber-ramp") return detail::chamber_ramp();
  if (name.rfind("constant-", 0) == 0) {
    const double temp = std::stod(name.substr(9));
    auto s = detail::constant_scenario(temp, 6.0 * 3600.0);
    s.name = name;
    return s;
  }
  throw ArgumentError("unknown scenario '" + name + "'");
}

/// CSV with a `time_s,ambient_c` header; `#` lines are comments.
inline void write_scenario_csv(std::ostream& out, const Scenario& s) {
  out << "# scenario " << s.name << " (synthetic) duration_s=" << s.duration_s << "\n";
  out << "time_s,ambient_c\n";
  for (const auto& b : s.schedule) out << b.time_s << ',' << b.temp_c << '\n';
}

inline Scenario read_scenario_csv(std::istream& in, std::string name, double duration_s = -1.0,
                                  double device_lag_tau_s = 180.0) {
  Scenario s{std::move(name), {}, duration_s, device_lag_tau_s};
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "time_s,ambient_c") throw ArgumentError("scenario CSV header must be 'time_s,ambient_c'");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    Breakpoint b;
    char comma = 0;
    if (!(ss >> b.time_s >> comma >> b.temp_c) || comma != ',') throw ArgumentError("bad scenario row '" + line + "'");
    s.schedule.push_back(b);
  }
  if (s.duration_s < 0 && !s.schedule.empty()) s.duration_s = s.schedule.back().time_s;
  s.validate();
  return s;
}

/// Device (DRAM) temperature sampled once per second, following
/// dT_dev/dt = (ambient - T_dev) / tau exactly for piecewise-linear ambient.
class ThermalTrack {
 public:
  explicit ThermalTrack(const Scenario& scenario) : tau_(scenario.device_lag_tau_s) {
    scenario.validate();
    const auto n = static_cast<std::size_t>(std::ceil(scenario.duration_s)) + 2;
    ambient_.resize(n);
    device_.resize(n);
    for (std::size_t i = 0; i < n; ++i) ambient_[i] = scenario.ambient_at(static_cast<double>(i));
    device_[0] = ambient_[0];
    for (std::size_t i = 1; i < n; ++i) {
      if (tau_ == 0.0) {
        device_[i] = ambient_[i];
        continue;
      }
      // Exact step for a linear input a(t) = a0 + slope * t over one second.
      const double slope = ambient_[i] - ambient_[i - 1];
      const double decay = std::exp(-1.0 / tau_);
      device_[i] = ambient_[i] - tau_ * slope + (device_[i - 1] - ambient_[i - 1] + tau_ * slope) * decay;
    }
  }

  double device_at(double t) const { return interpolate(device_, t); }
  double ambient_at(double t) const { return interpolate(ambient_, t); }

  /// Time average of the device temperature over [t0, t1].
  double device_mean(double t0, double t1) const {
    if (t1 <= t0) return device_at(t0);
    return integrate(t0, t1, [](double v) { return v; }) / (t1 - t0);
  }

  /// Constant temperature producing the same decay as the (covered) device
  /// temperature over [t0, t1], for temperature index k.
  double decay_equivalent_temperature(double t0, double t1, double k, double ref_temp_c,
                                      const CoverModel& cover) const {
    if (t1 <= t0) return effective_temperature(cover, device_at(t0));
    const double mean_rate = integrate(t0, t1,
                                       [&](double v) {
                                         return std::exp(k * (effective_temperature(cover, v) - ref_temp_c));
                                       }) /
                             (t1 - t0);
    return ref_temp_c + std::log(mean_rate) / k;
  }

 private:
  double interpolate(const std::vector<double>& series, double t) const {
    if (t <= 0) return series.front();
    const double last = static_cast<double>(series.size() - 1);
    if (t >= last) return series.back();
    const auto i = static_cast<std::size_t>(t);
    const double w = t - static_cast<double>(i);
    return series[i] + w * (series[i + 1] - series[i]);
  }

  // Trapezoid rule on the one-second grid plus the fractional end pieces.
  template <typename F>
  double integrate(double t0, double t1, F f) const {
    double sum = 0.0;
    double a = t0;
    double fa = f(device_at(a));
    while (a < t1) {
      const double b = std::min(t1, std::floor(a) + 1.0);
      const double fb = f(device_at(b));
      sum += 0.5 * (fa + fb) * (b - a);
      a = b;
      fa = fb;
    }
    return sum;
  }

  double tau_;
  std::vector<double> ambient_;
  std::vector<double> device_;
};

}  // namespace tempspy
