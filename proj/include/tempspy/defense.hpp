#pragma once

// Attack degradation caused by a thermal cover the attacker does not know about.

#include "tempspy/countermeasures.hpp"
#include "tempspy/harness.hpp"

#include <cstdio>
#include <ostream>
#include <string>

namespace tempspy {

struct DefenseReport {
  TraceSummary bare;
  TraceSummary covered;
  std::size_t bare_messages = 0;
  std::size_t covered_messages = 0;
  bool refused = false;

  double mean_degradation_c() const { return covered.mean_abs_error_c - bare.mean_abs_error_c; }
  double p95_degradation_c() const { return covered.p95_abs_error_c - bare.p95_abs_error_c; }
};

/// Runs the scenario twice with identical seeds: bare, then with `cover` applied
/// to the device while the collector keeps the bare model.
inline DefenseReport evaluate_defense(const CellArray& array, const Scenario& scenario, const CoverModel& cover,
                                      const AgentConfig& agent_cfg, const CollectorConfig& collector_cfg,
                                      const TraceFilter& filter = {}) {
  DefenseReport report;
  AgentConfig bare_cfg = agent_cfg;
  bare_cfg.cover = CoverModel::identity();
  AgentConfig covered_cfg = agent_cfg;
  covered_cfg.cover = cover;
  const auto bare = run_scenario_detailed(array, scenario, bare_cfg, collector_cfg);
  const auto covered = run_scenario_detailed(array, scenario, covered_cfg, collector_cfg);
  report.bare_messages = bare.messages_sent;
  report.covered_messages = covered.messages_sent;
  report.refused = bare.refusal.has_value() || covered.refusal.has_value();
  if (report.refused) return report;
  report.bare = evaluate_trace(bare.trace, filter);
  report.covered = evaluate_trace(covered.trace, filter);
  return report;
}

inline void write_defense_csv(std::ostream& out, const DefenseReport& r, const std::string& meta_comment = {}) {
  if (!meta_comment.empty()) out << "# " << meta_comment << '\n';
  out << "metric,bare,covered,delta\n";
  auto row = [&](const char* name, double bare, double covered) {
    out << name << ',' << format_temp(bare) << ',' << format_temp(covered) << ',' << format_temp(covered - bare)
        << '\n';
  };
  row("mean_abs_error_c", r.bare.mean_abs_error_c, r.covered.mean_abs_error_c);
  row("p95_abs_error_c", r.bare.p95_abs_error_c, r.covered.p95_abs_error_c);
  row("max_abs_error_c", r.bare.max_abs_error_c, r.covered.max_abs_error_c);
}

inline std::string defense_summary(const DefenseReport& r) {
  if (r.refused) return "attack blocked: the defense policy refused the measurement (0 spy messages)\n";
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "bare:    mean %.3f C  p95 %.3f C  max %.3f C  (%zu rows)\n"
                "covered: mean %.3f C  p95 %.3f C  max %.3f C  (%zu rows)\n"
                "degradation: mean %+.3f C  p95 %+.3f C\n",
                r.bare.mean_abs_error_c, r.bare.p95_abs_error_c, r.bare.max_abs_error_c, r.bare.rows,
                r.covered.mean_abs_error_c, r.covered.p95_abs_error_c, r.covered.max_abs_error_c, r.covered.rows,
                r.mean_degradation_c(), r.p95_degradation_c());
  return buf;
}

}  // namespace tempspy
