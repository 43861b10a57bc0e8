#pragma once

// Spy-to-collector line protocol. One record per line:
//
//   V1 <seq> <timestamp_s> <device_id> <region_id> <decay_time_ms> <flip_count>\n
//
// Fields are separated by exactly one space. timestamp_s is a non-negative
// decimal with at most three fractional digits (millisecond resolution) and no
// redundant zeros, so every message has exactly one encoding.

#include "tempspy/error.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace tempspy {

struct SpyMessage {
  std::uint64_t seq = 0;
  std::uint64_t timestamp_ms = 0;
  std::string device_id;
  std::string region_id;
  std::uint64_t decay_time_ms = 0;
  std::uint64_t flip_count = 0;

  double timestamp_s() const noexcept { return static_cast<double>(timestamp_ms) / 1000.0; }

  friend bool operator==(const SpyMessage&, const SpyMessage&) = default;
};

inline bool is_identifier_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
         c == '.' || c == ':';
}

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!is_identifier_char(c)) return false;
  return true;
}

/// "840", "840.5", "840.125"; never "840.0" or "840.50".
inline std::string format_millis(std::uint64_t ms) {
  std::string out = std::to_string(ms / 1000);
  auto frac = ms % 1000;
  if (frac == 0) return out;
  std::string digits = std::to_string(frac);
  digits.insert(0, 3 - digits.size(), '0');
  while (digits.back() == '0') digits.pop_back();
  return out + "." + digits;
}

inline std::string encode_message(const SpyMessage& msg) {
  if (!is_identifier(msg.device_id)) throw ArgumentError("device_id must be a non-empty identifier");
  if (!is_identifier(msg.region_id)) throw ArgumentError("region_id must be a non-empty identifier");
  if (msg.decay_time_ms == 0) throw ArgumentError("decay_time_ms must be > 0");
  std::string line = "V1 ";
  line += std::to_string(msg.seq);
  line += ' ';
  line += format_millis(msg.timestamp_ms);
  line += ' ';
  line += msg.device_id;
  line += ' ';
  line += msg.region_id;
  line += ' ';
  line += std::to_string(msg.decay_time_ms);
  line += ' ';
  line += std::to_string(msg.flip_count);
  line += '\n';
  return line;
}

namespace detail {

class LineCursor {
 public:
  explicit LineCursor(std::string_view line) : line_(line) {}

  std::size_t pos() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == line_.size(); }

  /// Next space-delimited token; consumes the separator after it unless `last`.
  std::string_view token(const char* what, bool last = false) {
    if (at_end()) throw ParseError(pos_, std::string("missing ") + what);
    const std::size_t start = pos_;
    while (pos_ < line_.size() && line_[pos_] != ' ') ++pos_;
    if (pos_ == start) throw ParseError(pos_, std::string("empty ") + what);
    std::string_view tok = line_.substr(start, pos_ - start);
    if (!last) {
      if (at_end()) throw ParseError(pos_, "expected a space after " + std::string(what));
      ++pos_;
    } else if (!at_end()) {
      throw ParseError(pos_, "trailing data after " + std::string(what));
    }
    return tok;
  }

 private:
  std::string_view line_;
  std::size_t pos_ = 0;
};

/// Canonical unsigned decimal: digits only, no leading zeros, fits in 64 bits.
inline std::uint64_t parse_canonical_u64(std::string_view tok, std::size_t offset, const char* what) {
  if (tok.size() > 1 && tok[0] == '0') throw ParseError(offset, std::string("leading zero in ") + what);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < tok.size(); ++i) {
    const char c = tok[i];
    if (c < '0' || c > '9') throw ParseError(offset + i, std::string("non-digit in ") + what);
    const std::uint64_t d = static_cast<std::uint64_t>(c - '0');
    if (v > (UINT64_MAX - d) / 10) throw ParseError(offset, std::string(what) + " overflows 64 bits");
    v = v * 10 + d;
  }
  return v;
}

inline std::uint64_t parse_timestamp_ms(std::string_view tok, std::size_t offset) {
  const auto dot = tok.find('.');
  const std::string_view whole = tok.substr(0, dot);
  if (whole.empty()) throw ParseError(offset, "timestamp needs an integer part");
  const std::uint64_t seconds = parse_canonical_u64(whole, offset, "timestamp");
  std::uint64_t frac = 0;
  if (dot != std::string_view::npos) {
    const std::string_view digits = tok.substr(dot + 1);
    const std::size_t frac_offset = offset + dot + 1;
    if (digits.empty()) throw ParseError(frac_offset, "timestamp has an empty fraction");
    if (digits.size() > 3) throw ParseError(frac_offset + 3, "timestamp has more than millisecond resolution");
    if (digits.back() == '0') throw ParseError(frac_offset + digits.size() - 1, "trailing zero in timestamp");
    for (std::size_t i = 0; i < digits.size(); ++i) {
      const char c = digits[i];
      if (c < '0' || c > '9') throw ParseError(frac_offset + i, "non-digit in timestamp");
      frac = frac * 10 + static_cast<std::uint64_t>(c - '0');
    }
    for (std::size_t i = digits.size(); i < 3; ++i) frac *= 10;
  }
  if (seconds > (UINT64_MAX - frac) / 1000) throw ParseError(offset, "timestamp overflows");
  return seconds * 1000 + frac;
}

}  // namespace detail

/// Accepts the line with or without its terminating newline.
inline SpyMessage decode_message(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  detail::LineCursor cur(line);

  std::size_t at = cur.pos();
  const auto version = cur.token("version");
  if (version != "V1") {
    bool versioned = version.size() >= 2 && version[0] == 'V';
    for (std::size_t i = 1; versioned && i < version.size(); ++i)
      versioned = version[i] >= '0' && version[i] <= '9';
    if (versioned) throw VersionError("unsupported wire version '" + std::string(version) + "'");
    throw ParseError(at, "line must start with a version token");
  }

  SpyMessage msg;
  at = cur.pos();
  msg.seq = detail::parse_canonical_u64(cur.token("seq"), at, "seq");
  at = cur.pos();
  msg.timestamp_ms = detail::parse_timestamp_ms(cur.token("timestamp"), at);

  at = cur.pos();
  const auto device = cur.token("device_id");
  for (std::size_t i = 0; i < device.size(); ++i)
    if (!is_identifier_char(device[i])) throw ParseError(at + i, "bad character in device_id");
  msg.device_id = std::string(device);

  at = cur.pos();
  const auto region = cur.token("region_id");
  for (std::size_t i = 0; i < region.size(); ++i)
    if (!is_identifier_char(region[i])) throw ParseError(at + i, "bad character in region_id");
  msg.region_id = std::string(region);

  at = cur.pos();
  msg.decay_time_ms = detail::parse_canonical_u64(cur.token("decay_time_ms"), at, "decay_time_ms");
  if (msg.decay_time_ms == 0) throw ParseError(at, "decay_time_ms must be > 0");

  at = cur.pos();
  msg.flip_count = detail::parse_canonical_u64(cur.token("flip_count", true), at, "flip_count");
  return msg;
}

}  // namespace tempspy
