#pragma once

// Bitmap files. Binary: u64 count followed by count u64 indices, all
// little-endian. CSV: a single `index` column, one flipped cell per row.

#include "tempspy/dram_sim.hpp"
#include "tempspy/error.hpp"

#include <array>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace tempspy {

namespace detail {

inline void put_u64_le(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

inline std::uint64_t get_u64_le(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != 8) throw ArgumentError("truncated binary bitmap");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_bitmap_binary(std::ostream& out, const DecayBitmap& bitmap) {
  detail::put_u64_le(out, bitmap.flipped.size());
  for (auto cell : bitmap.flipped) detail::put_u64_le(out, cell);
}

/// Metadata other than the region size is not stored in the binary form.
inline DecayBitmap read_bitmap_binary(std::istream& in, std::uint64_t region_size_bits) {
  DecayBitmap bitmap;
  bitmap.region_size_bits = region_size_bits;
  const auto count = detail::get_u64_le(in);
  if (count > region_size_bits) throw ArgumentError("bitmap count exceeds region size");
  bitmap.flipped.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) bitmap.flipped.push_back(detail::get_u64_le(in));
  bitmap.validate();
  return bitmap;
}

inline void write_bitmap_csv(std::ostream& out, const DecayBitmap& bitmap) {
  out << "index\n";
  for (auto cell : bitmap.flipped) out << cell << '\n';
}

inline DecayBitmap read_bitmap_csv(std::istream& in, std::uint64_t region_size_bits) {
  DecayBitmap bitmap;
  bitmap.region_size_bits = region_size_bits;
  std::string line;
  if (!std::getline(in, line) || line != "index") throw ArgumentError("bitmap CSV must start with 'index'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t used = 0;
    std::uint64_t cell = 0;
    try {
      cell = std::stoull(line, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != line.size()) throw ArgumentError("bad bitmap CSV row '" + line + "'");
    bitmap.flipped.push_back(cell);
  }
  bitmap.validate();
  return bitmap;
}

}  // namespace tempspy
