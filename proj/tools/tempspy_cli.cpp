// tempspy: command-line front end for the DRAM-decay temperature spy simulator.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error,
// 3 insufficient data, 4 attack refused by a defense.

#include "tempspy/tempspy.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace tempspy;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInsufficient = 3;
constexpr int kExitRefused = 4;

class Refused : public Error {
 public:
  using Error::Error;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void check_output_path(const std::string& flag, const std::string& path) {
  if (path.empty() || path == "-") return;
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent))
    throw ConfigError(flag, "directory '" + parent.string() + "' does not exist");
}

/// Writes to `path`, or stdout for "-".
template <typename F>
void write_output(const std::string& path, F&& writer) {
  if (path == "-") {
    writer(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("--out", "cannot open '" + path + "' for writing");
  writer(out);
  if (!out) throw Error("write to '" + path + "' failed");
}

json load_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(what, "cannot open '" + path + "'");
  return read_json(in, what);
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt) {
  auto cfg = KeyValueConfig::from_file(path);
  if (seed_override) cfg.set("master_seed", std::to_string(*seed_override));
  return run_config_from(cfg, fs::path(path).parent_path());
}

void print_summary(std::ostream& out, const TraceSummary& s) {
  out << "rows " << s.rows << "  mean_abs_error_c " << format_temp(s.mean_abs_error_c) << "  p95_abs_error_c "
      << format_temp(s.p95_abs_error_c) << "  max_abs_error_c " << format_temp(s.max_abs_error_c) << "  lag_s "
      << s.lag_s << '\n';
}

void echo_timing(double wall_s, double virtual_s) {
  std::cerr << "wall " << format_temp(wall_s) << " s, virtual " << format_temp(virtual_s) << " s\n";
}

/// Virtual device time of an enrollment: every measurement costs its decay time plus IO.
double enrollment_virtual_s(const EnrollmentTable& t) {
  const double io = default_io_overhead_s(t.region_size_bits);
  double total = 0;
  for (const auto& r : t.records) total += (r.decay_time_s + io) * static_cast<double>(r.repeat_counts.size());
  return total;
}

ScenarioRun run_attack(const AttackSetup& setup, bool tcp) {
  if (!tcp) return run_scenario_detailed(setup.spy_array, setup.scenario, setup.agent, setup.collector);
  ScenarioRun run;
  run.trace = run_scenario_tcp(setup.spy_array, setup.scenario, setup.agent, setup.collector);
  run.messages_sent = run.trace.rows.size();
  return run;
}

struct Options {
  std::string config;
  std::string out;
  std::string csv;
  std::string table;
  std::string model;
  std::string indicators;
  std::string messages;
  std::string bitmap;
  std::string format = "csv";
  std::string segments;
  std::string name;
  std::string connect;
  std::string transport = "loopback";
  std::string model_out;
  std::vector<double> counts;
  std::optional<std::uint64_t> seed;
  std::optional<double> k;
  double temp_c = 25.0;
  double decay_time_s = 120.0;
  std::size_t l = 5;
  std::uint16_t port = 0;
  std::size_t connections = 1;
};

int cmd_simulate(const Options& o) {
  check_output_path("--out", o.out);
  const auto rc = load_config(o.config);
  Stopwatch sw;
  const auto array = build_enroll_array(rc);
  const auto seed = o.seed.value_or(derive_seed(rc.master_seed, "simulate", 0));
  const auto bitmap = decay_measure(array, o.temp_c, o.decay_time_s, seed);
  if (!o.out.empty()) {
    if (o.format == "bin") write_output(o.out, [&](std::ostream& out) { write_bitmap_binary(out, bitmap); });
    else write_output(o.out, [&](std::ostream& out) { write_bitmap_csv(out, bitmap); });
  }
  std::cout << "flips " << bitmap.size() << " of " << array.charged_count() << " charged cells\n";
  echo_timing(sw.seconds(), o.decay_time_s + default_io_overhead_s(rc.region_size_bits));
  return kExitOk;
}

int cmd_enroll(const Options& o) {
  check_output_path("--out", o.out);
  check_output_path("--csv", o.csv);
  const auto rc = load_config(o.config);
  Stopwatch sw;
  const auto array = build_enroll_array(rc);
  const auto table = run_enrollment(rc, array, true);
  write_output(o.out, [&](std::ostream& out) { write_json(out, table_to_json(table, rc.meta())); });
  if (!o.csv.empty()) write_output(o.csv, [&](std::ostream& out) { write_table_csv(out, table, rc.meta()); });
  std::cout << "records " << table.records.size() << " mode " << to_string(table.mode) << '\n';
  echo_timing(sw.seconds(), enrollment_virtual_s(table));
  return kExitOk;
}

int cmd_indicators(const Options& o) {
  check_output_path("--out", o.out);
  const auto doc = load_json_file(o.table, "--table");
  const auto table = table_from_json(doc);
  const auto set = select_indicator_cells(table, o.l);
  write_output(o.out, [&](std::ostream& out) { write_json(out, indicators_to_json(set, document_meta(doc))); });
  std::cout << "steps " << set.steps.size() << " l " << set.l << " stored_cells " << set.stored_cells() << '\n';
  return kExitOk;
}

int cmd_fit(const Options& o) {
  check_output_path("--out", o.out);
  const auto doc = load_json_file(o.table, "--table");
  const auto table = table_from_json(doc);
  std::string segments = o.segments;
  double k = o.k.value_or(0.07);
  if (!o.config.empty()) {
    const auto rc = load_config(o.config);
    if (segments.empty()) segments = KeyValueConfig::from_file(o.config).get_string("fit.segments").value_or("");
    if (!o.k) k = rc.enroll_k;
  }
  if (segments.empty()) segments = "0,25,45,70";
  auto model = fit_approx_model(table, parse_number_list("--segments", segments), k);
  model.enroll_device_id = "array:" + std::to_string(table.device_seed);
  write_output(o.out, [&](std::ostream& out) { write_json(out, model_to_json(model, document_meta(doc))); });
  std::cout << "segments " << model.segments.size() << (model.monotone() ? "" : " (not monotone)") << '\n';
  for (const auto& s : model.segments)
    std::cout << "  [" << s.t_lo << ", " << s.t_hi << "] c1 " << s.c1 << " c2 " << s.c2 << '\n';
  return kExitOk;
}

int cmd_decode(const Options& o) {
  std::optional<ApproxModel> model;
  std::optional<IndicatorCellSet> indicators;
  if (!o.model.empty()) model = model_from_json(load_json_file(o.model, "--model"));
  if (!o.indicators.empty()) indicators = indicators_from_json(load_json_file(o.indicators, "--indicators"));
  if (model.has_value() == indicators.has_value())
    throw ConfigError("--model/--indicators", "give exactly one of --model or --indicators");

  std::cout << "timestamp_s,flips,T_apx\n";
  auto emit = [&](const std::string& ts, std::uint64_t flips, double temp) {
    std::cout << ts << ',' << flips << ',' << format_temp(temp) << '\n';
  };
  if (!o.bitmap.empty()) {
    if (!indicators) throw ConfigError("--bitmap", "bitmap decoding needs --indicators");
    std::ifstream in(o.bitmap, std::ios::binary);
    if (!in) throw ConfigError("--bitmap", "cannot open '" + o.bitmap + "'");
    auto bitmap = o.format == "bin" ? read_bitmap_binary(in, indicators->region_size_bits)
                                    : read_bitmap_csv(in, indicators->region_size_bits);
    bitmap.decay_time_s = indicators->decay_time_s;
    const auto result = decode_temperature(bitmap, *indicators);
    emit("", bitmap.size(), result.temp_c);
    if (!result.consistent) std::cerr << "warning: inconsistent indicator votes\n";
    return kExitOk;
  }
  auto infer = [&](std::uint64_t value) {
    if (model) return approx_temperature(*model, static_cast<double>(value));
    const auto level = std::min<std::uint64_t>(value, indicators->temps.size() - 1);
    return indicators->temps[level];
  };
  if (!o.messages.empty()) {
    std::ifstream in(o.messages);
    if (!in) throw ConfigError("--messages", "cannot open '" + o.messages + "'");
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      const auto msg = decode_message(line);
      emit(format_millis(msg.timestamp_ms), msg.flip_count, infer(msg.flip_count));
    }
    return kExitOk;
  }
  if (o.counts.empty()) throw ConfigError("--count", "nothing to decode: give --count, --messages or --bitmap");
  for (double c : o.counts) {
    if (!(c >= 0)) throw ConfigError("--count", "counts must be >= 0");
    if (model) emit("", static_cast<std::uint64_t>(c), approx_temperature(*model, c));
    else emit("", static_cast<std::uint64_t>(c), infer(static_cast<std::uint64_t>(c)));
  }
  return kExitOk;
}

int cmd_estimate_k(const Options& o) {
  const auto rc = load_config(o.config);
  Stopwatch sw;
  const auto array = build_enroll_array(rc);
  const auto fit = run_kfit(rc, array);
  std::cout << "k " << fit.k << " pairs " << fit.pairs.size() << '\n';
  echo_timing(sw.seconds(), 0.0);
  return kExitOk;
}

int cmd_scenario_list(const Options&) {
  for (const auto& name : builtin_scenario_names()) {
    const auto s = builtin_scenario(name);
    std::cout << name << "  duration_s " << s.duration_s << "  breakpoints " << s.schedule.size() << '\n';
  }
  return kExitOk;
}

int cmd_scenario_export(const Options& o) {
  check_output_path("--out", o.out);
  const auto s = builtin_scenario(o.name);
  write_output(o.out, [&](std::ostream& out) { write_scenario_csv(out, s); });
  return kExitOk;
}

std::string trace_comment(const RunConfig& rc, const TemperatureTrace& trace) {
  std::ostringstream ss;
  ss << rc.meta().comment() << " scenario=" << trace.scenario << " device_lag_tau_s=" << trace.device_lag_tau_s;
  return ss.str();
}

int attack_and_write(const RunConfig& rc, const Options& o) {
  Stopwatch sw;
  const auto setup = prepare_attack(rc);
  if (!o.model_out.empty()) {
    if (rc.indicator_mode)
      write_output(o.model_out,
                   [&](std::ostream& out) { write_json(out, indicators_to_json(*setup.indicators, rc.meta())); });
    else
      write_output(o.model_out, [&](std::ostream& out) { write_json(out, model_to_json(setup.model, rc.meta())); });
  }
  const auto run = run_attack(setup, o.transport == "tcp");
  if (run.refusal) throw Refused("attack blocked: " + run.refusal->reason + " (0 spy messages)");
  write_output(o.out, [&](std::ostream& out) { write_trace_csv(out, run.trace, trace_comment(rc, run.trace)); });
  if (!run.trace.missing_seqs.empty())
    std::cerr << "collector: " << run.trace.missing_seqs.size() << " missing sequence numbers\n";
  if (!run.trace.rows.empty()) print_summary(std::cout, evaluate_trace(run.trace, rc.eval_filter));
  if (!rc.same_device && !rc.indicator_mode) std::cout << "p " << setup.model.p << '\n';
  echo_timing(sw.seconds(), setup.scenario.duration_s);
  return kExitOk;
}

int cmd_attack(const Options& o) {
  check_output_path("--out", o.out);
  check_output_path("--model-out", o.model_out);
  if (o.transport != "loopback" && o.transport != "tcp")
    throw ConfigError("--transport", "expected 'loopback' or 'tcp'");
  return attack_and_write(load_config(o.config, o.seed), o);
}

int cmd_scenario_run(const Options& o) {
  check_output_path("--out", o.out);
  RunConfig rc;
  if (!o.config.empty()) {
    rc = load_config(o.config, o.seed);
  } else {
    KeyValueConfig cfg;
    cfg.set("enroll.region_size", "2MiB");
    cfg.set("fit.segments", "2.5:2.5:70");
    if (o.seed) cfg.set("master_seed", std::to_string(*o.seed));
    rc = run_config_from(cfg);
  }
  rc.scenario_name = o.name;
  rc.scenario_file.reset();
  return attack_and_write(rc, o);
}

int cmd_defend(const Options& o) {
  check_output_path("--out", o.out);
  const auto rc = load_config(o.config, o.seed);
  if (rc.indicator_mode) throw ConfigError("attack.mode", "defense evaluation uses the approximation attack");
  Stopwatch sw;
  const auto setup = prepare_attack(rc);
  const auto report =
      evaluate_defense(setup.spy_array, setup.scenario, rc.cover, setup.agent, setup.collector, rc.eval_filter);
  std::cout << defense_summary(report);
  if (report.refused) throw Refused("attack blocked by the defense policy");
  write_output(o.out, [&](std::ostream& out) { write_defense_csv(out, report, rc.meta().comment()); });
  echo_timing(sw.seconds(), 2 * setup.scenario.duration_s);
  return kExitOk;
}

TemperatureTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--trace", "cannot open '" + path + "'");
  TemperatureTrace trace;
  bool header = false;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "timestamp_s,ambient_true_c,device_true_c,inferred_c,abs_error_c")
        throw ArgumentError("not a trace CSV: unexpected header");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw ArgumentError("bad trace row '" + line + "'");
    TraceRow r;
    r.timestamp_ms = static_cast<std::uint64_t>(std::llround(std::stod(fields[0]) * 1000.0));
    r.ambient_true_c = std::stod(fields[1]);
    r.device_true_c = std::stod(fields[2]);
    r.inferred_c = std::stod(fields[3]);
    r.abs_error_c = std::stod(fields[4]);
    trace.rows.push_back(r);
  }
  return trace;
}

int cmd_report(const Options& o) {
  const auto trace = read_trace_csv(o.table);
  TraceFilter filter;
  if (!o.config.empty()) filter = load_config(o.config).eval_filter;
  print_summary(std::cout, evaluate_trace(trace, filter));
  return kExitOk;
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw ConfigError("--connect", "expected HOST:PORT");
  const auto port = std::stoul(text.substr(colon + 1));
  if (port == 0 || port > 65535) throw ConfigError("--connect", "bad port");
  return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

int cmd_agent(const Options& o) {
  const auto [host, port] = split_host_port(o.connect);
  const auto rc = load_config(o.config, o.seed);
  std::shared_ptr<const IndicatorCellSet> indicators;
  if (!o.indicators.empty())
    indicators = std::make_shared<const IndicatorCellSet>(indicators_from_json(load_json_file(o.indicators, "--indicators")));
  const auto spy = build_spy_array(rc);
  const auto scenario = load_scenario(rc);
  const ThermalTrack track(scenario);
  SpyAgent agent(spy, track, scenario.duration_s, agent_config(rc, indicators));
  TcpSink sink(host, port);
  const auto sent = agent.run(sink);
  std::cout << "sent " << sent << " messages\n";
  if (agent.refused()) throw Refused("attack blocked: " + agent.refusal()->reason + " (0 spy messages)");
  return kExitOk;
}

int cmd_collector(const Options& o) {
  check_output_path("--out", o.out);
  const auto rc = load_config(o.config, o.seed);
  CollectorConfig cc;
  if (!o.model.empty()) {
    cc.model = model_from_json(load_json_file(o.model, "--model"));
  } else if (!o.indicators.empty()) {
    cc.mode = CollectorConfig::Mode::indicator;
    cc.indicator_temps = indicators_from_json(load_json_file(o.indicators, "--indicators")).temps;
  } else {
    throw ConfigError("--model", "collector needs --model or --indicators");
  }
  const auto scenario = load_scenario(rc);
  const ThermalTrack track(scenario);
  const auto timing = CycleTiming::from(agent_config(rc), rc.region_size_bits);
  Collector collector(cc, GroundTruth(track, timing.read_ms));
  TcpLineListener listener(o.port, "0.0.0.0");
  std::cerr << "listening on port " << listener.port() << '\n';
  listener.serve(o.connections, [&](const std::string& line) { collector.on_line(line); });
  auto& trace = collector.trace();
  trace.scenario = scenario.name;
  trace.device_lag_tau_s = scenario.device_lag_tau_s;
  write_output(o.out, [&](std::ostream& out) { write_trace_csv(out, trace, trace_comment(rc, trace)); });
  for (auto seq : trace.missing_seqs) std::cerr << "collector: missing seq " << seq << '\n';
  if (trace.rejected_lines) std::cerr << "collector: rejected " << trace.rejected_lines << " lines\n";
  if (!trace.rows.empty()) print_summary(std::cout, evaluate_trace(trace, rc.eval_filter));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated DRAM-decay temperature spy"};
  app.set_version_flag("--version", std::string("tempspy ") + TEMPSPY_VERSION);
  app.require_subcommand(1);
  Options o;
  int (*handler)(const Options&) = nullptr;
  auto bind = [&](CLI::App* sub, int (*fn)(const Options&)) { sub->callback([&handler, fn] { handler = fn; }); };

  auto* simulate = app.add_subcommand("simulate", "One decay measurement on the enrollment device");
  simulate->add_option("--config", o.config, "Run configuration")->required()->check(CLI::ExistingFile);
  simulate->add_option("--temp", o.temp_c, "Temperature in C")->required();
  simulate->add_option("--time", o.decay_time_s, "Decay time in s")->required();
  simulate->add_option("--seed", o.seed, "Measurement seed");
  simulate->add_option("--out", o.out, "Bitmap output file");
  simulate->add_option("--format", o.format, "csv or bin")->check(CLI::IsMember({"csv", "bin"}));
  bind(simulate, cmd_simulate);

  auto* enroll = app.add_subcommand("enroll", "Enrollment table from the configured grid");
  enroll->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  enroll->add_option("--out", o.out, "Table JSON")->required();
  enroll->add_option("--csv", o.csv, "Also export (T, t, flip_count) CSV");
  bind(enroll, cmd_enroll);

  auto* indicators = app.add_subcommand("indicators", "Select indicator cells from an enrollment table");
  indicators->add_option("--table", o.table)->required()->check(CLI::ExistingFile);
  indicators->add_option("--l", o.l, "Cells per step (odd, >= 3)");
  indicators->add_option("--out", o.out)->required();
  bind(indicators, cmd_indicators);

  auto* fit = app.add_subcommand("fit", "Fit the piecewise approximation model");
  fit->add_option("--table", o.table)->required()->check(CLI::ExistingFile);
  fit->add_option("--config", o.config, "Reads fit.segments and enroll.k")->check(CLI::ExistingFile);
  fit->add_option("--segments", o.segments, "Segment bounds, e.g. 0,25,45,70 or 2.5:2.5:70");
  fit->add_option("--k", o.k, "Temperature index stored with the model");
  fit->add_option("--out", o.out)->required();
  bind(fit, cmd_fit);

  auto* decode = app.add_subcommand("decode", "Turn flip counts or bitmaps into temperatures");
  decode->add_option("--model", o.model)->check(CLI::ExistingFile);
  decode->add_option("--indicators", o.indicators)->check(CLI::ExistingFile);
  decode->add_option("--count", o.counts, "Flip counts (or levels with --indicators)");
  decode->add_option("--messages", o.messages, "File of wire-protocol lines")->check(CLI::ExistingFile);
  decode->add_option("--bitmap", o.bitmap, "Bitmap file (with --indicators)")->check(CLI::ExistingFile);
  decode->add_option("--format", o.format, "Bitmap format: csv or bin")->check(CLI::IsMember({"csv", "bin"}));
  bind(decode, cmd_decode);

  auto* estimate = app.add_subcommand("estimate-k", "Estimate the temperature index from decay sweeps");
  estimate->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  bind(estimate, cmd_estimate_k);

  auto* scenario = app.add_subcommand("scenario", "Built-in ambient scenarios");
  scenario->require_subcommand(1);
  auto* sc_list = scenario->add_subcommand("list", "List built-in scenarios");
  bind(sc_list, cmd_scenario_list);
  auto* sc_export = scenario->add_subcommand("export", "Write a scenario's breakpoints as CSV");
  sc_export->add_option("--name", o.name)->required();
  sc_export->add_option("--out", o.out)->required();
  bind(sc_export, cmd_scenario_export);
  auto* sc_run = scenario->add_subcommand("run", "Run the attack on a built-in scenario");
  sc_run->add_option("--name", o.name)->required();
  sc_run->add_option("--seed", o.seed, "Master seed");
  sc_run->add_option("--config", o.config)->check(CLI::ExistingFile);
  sc_run->add_option("--out", o.out, "Trace CSV")->required();
  sc_run->add_option("--transport", o.transport)->check(CLI::IsMember({"loopback", "tcp"}));
  bind(sc_run, cmd_scenario_run);

  auto* attack = app.add_subcommand("attack", "Enroll, calibrate and run the configured attack");
  attack->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  attack->add_option("--seed", o.seed, "Override master_seed");
  attack->add_option("--out", o.out, "Trace CSV")->required();
  attack->add_option("--model-out", o.model_out, "Write the model or indicator set used");
  attack->add_option("--transport", o.transport)->check(CLI::IsMember({"loopback", "tcp"}));
  bind(attack, cmd_attack);

  auto* defend = app.add_subcommand("defend", "Attack error with and without the configured cover");
  defend->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  defend->add_option("--seed", o.seed, "Override master_seed");
  defend->add_option("--out", o.out, "Degradation report CSV")->required();
  bind(defend, cmd_defend);

  auto* report = app.add_subcommand("report", "Error statistics of a trace CSV");
  report->add_option("--trace", o.table)->required()->check(CLI::ExistingFile);
  report->add_option("--config", o.config, "Reads the attack.eval_* range")->check(CLI::ExistingFile);
  bind(report, cmd_report);

  auto* agent = app.add_subcommand("agent", "Spy agent streaming flip counts to a collector");
  agent->add_option("--config", o.config)->required()->check(CLI::ExistingFile);
  agent->add_option("--connect", o.connect, "HOST:PORT")->required();
  agent->add_option("--indicators", o.indicators, "Decode on the device with this indicator set")
      ->check(CLI::ExistingFile);
  agent->add_option("--seed", o.seed, "Override master_seed");
  bind(agent, cmd_agent);

  auto* collector = app.add_subcommand("collector", "Collector turning received counts into a trace");
  collector->add_option("--config", o.config, "Scenario used for the ground truth")->required()->check(CLI::ExistingFile);
  collector->add_option("--model", o.model)->check(CLI::ExistingFile);
  collector->add_option("--indicators", o.indicators)->check(CLI::ExistingFile);
  collector->add_option("--listen", o.port, "TCP port (0 picks one)")->required();
  collector->add_option("--connections", o.connections, "Agents to serve before writing the trace");
  collector->add_option("--out", o.out, "Trace CSV")->required();
  collector->add_option("--seed", o.seed, "Override master_seed");
  bind(collector, cmd_collector);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    return handler(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InsufficientDataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInsufficient;
  } catch (const DegenerateCalibrationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInsufficient;
  } catch (const UndefinedBerError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInsufficient;
  } catch (const Refused& e) {
    std::cerr << e.what() << '\n';
    return kExitRefused;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
}
