#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "sgtraj/errors.hpp"

// Little-endian primitives shared by the checkpoint and dataset codecs.
namespace sgtraj::io {

template <class U>
void put_uint(std::ostream& os, U v) {
  std::array<char, sizeof(U)> b{};
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  os.write(b.data(), b.size());
}

template <class U>
U get_uint(std::istream& is) {
  std::array<unsigned char, sizeof(U)> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) throw FormatError("unexpected end of stream");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<U>(v);
}

inline void put_f64(std::ostream& os, double v) { put_uint<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_uint<std::uint64_t>(is)); }

inline void put_i64(std::ostream& os, std::int64_t v) { put_uint<std::uint64_t>(os, static_cast<std::uint64_t>(v)); }
inline std::int64_t get_i64(std::istream& is) { return static_cast<std::int64_t>(get_uint<std::uint64_t>(is)); }

inline void put_string(std::ostream& os, std::string_view s) {
  put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, std::size_t max_len = 1u << 20) {
  const auto n = get_uint<std::uint32_t>(is);
  if (n > max_len) throw FormatError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw FormatError("unexpected end of stream in string");
  return s;
}

inline void put_magic(std::ostream& os, std::string_view magic) { os.write(magic.data(), 4); }

inline void expect_magic(std::istream& is, std::string_view magic) {
  std::array<char, 4> b{};
  if (!is.read(b.data(), 4) || std::string_view(b.data(), 4) != magic)
    throw FormatError("bad magic, expected \"" + std::string(magic) + "\"");
}

}  // namespace sgtraj::io
