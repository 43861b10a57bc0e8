#pragma once

// Versioned JSON documents for enrollment tables, approximation models and
// indicator cell sets, plus CSV export of enrollment tables. Every document
// carries {"format", "version", "meta"}; see README.md for the schemas.

#include "tempspy/enrollment.hpp"
#include "tempspy/error.hpp"
#include "tempspy/inference.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

namespace tempspy {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kTableFormat = "tempspy.enrollment_table";
inline constexpr const char* kModelFormat = "tempspy.approx_model";
inline constexpr const char* kIndicatorFormat = "tempspy.indicator_cells";

#ifndef TEMPSPY_VERSION
#define TEMPSPY_VERSION "0.0.0"
#endif

struct ArtifactMeta {
  std::string tool_version = TEMPSPY_VERSION;
  std::uint64_t master_seed = 0;
  std::string config_digest;

  /// One-line form used as the leading comment of CSV artifacts.
  std::string comment() const {
    return "tempspy " + tool_version + " master_seed=" + std::to_string(master_seed) +
           " config_digest=" + config_digest;
  }

  friend bool operator==(const ArtifactMeta&, const ArtifactMeta&) = default;
};

inline json meta_to_json(const ArtifactMeta& m) {
  return {{"tool_version", m.tool_version}, {"master_seed", m.master_seed}, {"config_digest", m.config_digest}};
}

inline ArtifactMeta meta_from_json(const json& j) {
  ArtifactMeta m;
  m.tool_version = j.at("tool_version").get<std::string>();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.config_digest = j.at("config_digest").get<std::string>();
  return m;
}

namespace detail {

inline json document(const char* format, const ArtifactMeta& meta) {
  return {{"format", format}, {"version", kFormatVersion}, {"meta", meta_to_json(meta)}};
}

inline void check_document(const json& j, const char* format) {
  if (!j.is_object() || !j.contains("format") || j.at("format") != format)
    throw ArgumentError(std::string("not a ") + format + " document");
  const int version = j.at("version").get<int>();
  if (version != kFormatVersion)
    throw VersionError(std::string(format) + " version " + std::to_string(version) + " is not supported");
}

template <typename F>
auto guarded(const char* what, F f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("malformed ") + what + ": " + e.what());
  }
}

inline json bitmap_to_json(const DecayBitmap& b) {
  return {{"measurement_seed", b.measurement_seed}, {"cells", b.flipped}};
}

inline DecayBitmap bitmap_from_json(const json& j, std::uint64_t region_size_bits, double temp_c, double decay_time_s) {
  DecayBitmap b;
  b.region_size_bits = region_size_bits;
  b.temp_c = temp_c;
  b.decay_time_s = decay_time_s;
  b.measurement_seed = j.at("measurement_seed").get<std::uint64_t>();
  b.flipped = j.at("cells").get<std::vector<std::uint64_t>>();
  b.validate();
  return b;
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> optional_number(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace detail

inline json table_to_json(const EnrollmentTable& t, const ArtifactMeta& meta) {
  json j = detail::document(kTableFormat, meta);
  j["mode"] = to_string(t.mode);
  j["base_decay_time_s"] = t.base_decay_time_s;
  j["k_used"] = detail::optional_number(t.k_used);
  j["enroll_temp_c"] = detail::optional_number(t.enroll_temp_c);
  j["region_size_bits"] = t.region_size_bits;
  j["device_seed"] = t.device_seed;
  json records = json::array();
  for (const auto& r : t.records) {
    json rec = {{"nominal_temp_c", r.nominal_temp_c},
                {"decay_time_s", r.decay_time_s},
                {"flip_count", r.flip_count},
                {"repeat_counts", r.repeat_counts}};
    if (r.bitmap) {
      rec["measure_temp_c"] = r.bitmap->temp_c;
      json bitmaps = json::array();
      bitmaps.push_back(detail::bitmap_to_json(*r.bitmap));
      for (const auto& b : r.repeats) bitmaps.push_back(detail::bitmap_to_json(b));
      rec["bitmaps"] = std::move(bitmaps);
    }
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  return j;
}

inline EnrollmentTable table_from_json(const json& j) {
  detail::check_document(j, kTableFormat);
  return detail::guarded("enrollment table", [&] {
    EnrollmentTable t;
    t.mode = enrollment_mode_from_string(j.at("mode").get<std::string>());
    t.base_decay_time_s = j.at("base_decay_time_s").get<double>();
    t.k_used = detail::optional_number(j.at("k_used"));
    t.enroll_temp_c = detail::optional_number(j.at("enroll_temp_c"));
    t.region_size_bits = j.at("region_size_bits").get<std::uint64_t>();
    t.device_seed = j.at("device_seed").get<std::uint64_t>();
    for (const auto& rec : j.at("records")) {
      EnrollmentRecord r;
      r.nominal_temp_c = rec.at("nominal_temp_c").get<double>();
      r.decay_time_s = rec.at("decay_time_s").get<double>();
      r.flip_count = rec.at("flip_count").get<std::size_t>();
      r.repeat_counts = rec.at("repeat_counts").get<std::vector<std::size_t>>();
      if (rec.contains("bitmaps")) {
        const double measure_temp = rec.at("measure_temp_c").get<double>();
        const auto& bitmaps = rec.at("bitmaps");
        for (std::size_t i = 0; i < bitmaps.size(); ++i) {
          auto b = detail::bitmap_from_json(bitmaps[i], t.region_size_bits, measure_temp, r.decay_time_s);
          if (i == 0) r.bitmap = std::move(b);
          else r.repeats.push_back(std::move(b));
        }
      }
      t.records.push_back(std::move(r));
    }
    t.validate();
    return t;
  });
}

inline json model_to_json(const ApproxModel& m, const ArtifactMeta& meta) {
  json j = detail::document(kModelFormat, meta);
  j["k"] = m.k;
  j["p"] = m.p;
  j["decay_time_s"] = m.decay_time_s;
  j["enroll_device_id"] = m.enroll_device_id;
  j["region_size_bits"] = m.region_size_bits;
  json segments = json::array();
  for (const auto& s : m.segments)
    segments.push_back({{"t_lo", s.t_lo}, {"t_hi", s.t_hi}, {"c1", s.c1}, {"c2", s.c2}});
  j["segments"] = std::move(segments);
  return j;
}

inline ApproxModel model_from_json(const json& j) {
  detail::check_document(j, kModelFormat);
  return detail::guarded("approximation model", [&] {
    ApproxModel m;
    m.k = j.at("k").get<double>();
    m.p = j.at("p").get<double>();
    m.decay_time_s = j.at("decay_time_s").get<double>();
    m.enroll_device_id = j.at("enroll_device_id").get<std::string>();
    m.region_size_bits = j.at("region_size_bits").get<std::uint64_t>();
    for (const auto& s : j.at("segments"))
      m.segments.push_back(
          {s.at("t_lo").get<double>(), s.at("t_hi").get<double>(), s.at("c1").get<double>(), s.at("c2").get<double>()});
    m.validate();
    return m;
  });
}

inline json indicators_to_json(const IndicatorCellSet& s, const ArtifactMeta& meta) {
  json j = detail::document(kIndicatorFormat, meta);
  j["l"] = s.l;
  j["temps"] = s.temps;
  j["decay_time_s"] = s.decay_time_s;
  j["region_size_bits"] = s.region_size_bits;
  j["steps"] = s.steps;
  return j;
}

inline IndicatorCellSet indicators_from_json(const json& j) {
  detail::check_document(j, kIndicatorFormat);
  return detail::guarded("indicator cell set", [&] {
    IndicatorCellSet s;
    s.l = j.at("l").get<std::size_t>();
    s.temps = j.at("temps").get<std::vector<double>>();
    s.decay_time_s = j.at("decay_time_s").get<double>();
    s.region_size_bits = j.at("region_size_bits").get<std::uint64_t>();
    s.steps = j.at("steps").get<std::vector<std::vector<std::uint64_t>>>();
    s.validate();
    return s;
  });
}

inline ArtifactMeta document_meta(const json& j) {
  return detail::guarded("document", [&] { return meta_from_json(j.at("meta")); });
}

inline json read_json(std::istream& in, const std::string& what) {
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ArgumentError("cannot parse " + what + ": " + e.what());
  }
}

inline void write_json(std::ostream& out, const json& j) { out << j.dump(1) << '\n'; }

/// (T, t, flip_count) rows for plotting.
inline void write_table_csv(std::ostream& out, const EnrollmentTable& t, const ArtifactMeta& meta) {
  out << "# " << meta.comment() << " mode=" << to_string(t.mode) << '\n';
  out << "temp_c,decay_time_s,flip_count,mean_flip_count\n";
  char buf[128];
  for (const auto& r : t.records) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6f,%zu,%.6f\n", r.nominal_temp_c, r.decay_time_s, r.flip_count,
                  r.mean_flip_count());
    out << buf;
  }
}

}  // namespace tempspy
