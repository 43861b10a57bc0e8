#pragma once

// Key-value run configuration (INI syntax: `key = value`, `[section]`, `;` or
// `#` comments). See data/sample.conf for every recognized key.

#include "tempspy/dram_sim.hpp"
#include "tempspy/error.hpp"
#include "tempspy/random.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace tempspy {

/// Parses "2MiB", "512KiB", "256KiBit", "1MiBit" or a bare bit count.
inline std::uint64_t parse_region_size_bits(const std::string& text) {
  struct Unit {
    const char* suffix;
    std::uint64_t bits;
  };
  static constexpr Unit kUnits[] = {{"GiBit", 1ULL << 30}, {"MiBit", 1ULL << 20}, {"KiBit", 1ULL << 10},
                                    {"GiB", 8ULL << 30},   {"MiB", 8ULL << 20},   {"KiB", 8ULL << 10},
                                    {"bits", 1},           {"bit", 1},            {"B", 8}};
  std::string number = text;
  std::uint64_t multiplier = 1;
  for (const auto& unit : kUnits) {
    const std::string suffix = unit.suffix;
    if (text.size() > suffix.size() && text.compare(text.size() - suffix.size(), suffix.size(), suffix) == 0) {
      number = text.substr(0, text.size() - suffix.size());
      multiplier = unit.bits;
      break;
    }
  }
  std::size_t used = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(number, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (number.empty() || used != number.size() || value == 0)
    throw ConfigError("region_size", "cannot parse '" + text + "'");
  return value * multiplier;
}

/// Parses "start:step:stop" (inclusive) or a comma-separated list.
inline std::vector<double> parse_number_list(const std::string& field, const std::string& text) {
  auto to_double = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) throw ConfigError(field, "bad number '" + s + "'");
    return v;
  };
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(trim(part));
    if (parts.size() != 3) throw ConfigError(field, "range must be start:step:stop");
    const double start = to_double(parts[0]), step = to_double(parts[1]), stop = to_double(parts[2]);
    if (step <= 0 || stop < start) throw ConfigError(field, "range needs step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
  }
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) out.push_back(to_double(trim(part)));
  if (out.empty()) throw ConfigError(field, "empty list");
  return out;
}

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_string(const std::string& text) {
    KeyValueConfig cfg;
    std::stringstream ss(text);
    try {
      boost::property_tree::ini_parser::read_ini(ss, cfg.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError("<file>", e.message() + " at line " + std::to_string(e.line()));
    }
    cfg.text_ = text;
    return cfg;
  }

  static KeyValueConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
  }

  bool has(const std::string& key) const { return tree_.get_optional<std::string>(key).has_value(); }

  std::optional<std::string> get_string(const std::string& key) const {
    auto v = tree_.get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return *v;
  }

  std::string require_string(const std::string& key) const {
    auto v = get_string(key);
    if (!v || v->empty()) throw ConfigError(key, "missing required key");
    return *v;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get_string(key);
    if (!v) return fallback;
    return parse_double(key, *v);
  }

  double require_double(const std::string& key) const { return parse_double(key, require_string(key)); }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto v = get_string(key);
    if (!v) return fallback;
    std::size_t used = 0;
    unsigned long long value = 0;
    try {
      value = std::stoull(*v, &used, 0);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v->size()) throw ConfigError(key, "expected an unsigned integer, got '" + *v + "'");
    return value;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get_string(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(key, "expected true/false, got '" + *v + "'");
  }

  void set(const std::string& key, const std::string& value) { tree_.put(key, value); }

  /// Stable digest of the parsed key/value content (order-insensitive).
  std::uint64_t digest() const {
    std::vector<std::string> lines;
    collect("", tree_, lines);
    std::sort(lines.begin(), lines.end());
    std::string joined;
    for (const auto& line : lines) joined += line + '\n';
    return fnv1a64(joined);
  }

  std::string digest_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest()));
    return buf;
  }

 private:
  static double parse_double(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v))
      throw ConfigError(key, "expected a number, got '" + text + "'");
    return v;
  }

  static void collect(const std::string& prefix, const boost::property_tree::ptree& node,
                      std::vector<std::string>& out) {
    for (const auto& [key, child] : node) {
      const std::string path = prefix.empty() ? key : prefix + "." + key;
      if (child.empty())
        out.push_back(path + "=" + child.data());
      else
        collect(path, child, out);
    }
  }

  boost::property_tree::ptree tree_;
  std::string text_;
};

/// Reads the [model] section; absent keys keep their calibrated defaults.
inline ModelParams model_params_from(const KeyValueConfig& cfg, const std::string& section = "model") {
  ModelParams p;
  auto key = [&](const char* name) { return section + "." + name; };
  p.ref_temp_c = cfg.get_double(key("ref_temp_c"), p.ref_temp_c);
  p.k_true = cfg.get_double(key("k_true"), p.k_true);
  p.retention_log_mean = cfg.get_double(key("retention_log_mean"), p.retention_log_mean);
  p.retention_log_sigma = cfg.get_double(key("retention_log_sigma"), p.retention_log_sigma);
  p.retention_scale = cfg.get_double(key("retention_scale"), p.retention_scale);
  p.noise_sigma = cfg.get_double(key("noise_sigma"), p.noise_sigma);
  p.noise_ref_time_s = cfg.get_double(key("noise_ref_time_s"), p.noise_ref_time_s);
  p.noise_time_exponent = cfg.get_double(key("noise_time_exponent"), p.noise_time_exponent);
  p.charged_probability = cfg.get_double(key("charged_probability"), p.charged_probability);
  p.weak_cache_time_s = cfg.get_double(key("weak_cache_time_s"), p.weak_cache_time_s);
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(section + "." + e.field(), e.what());
  }
  return p;
}

}  // namespace tempspy
