#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sgtraj/binary_io.hpp"
#include "sgtraj/tensor.hpp"

namespace sgtraj {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// On-disk layout, all little-endian:
//   "SGTR" | version u32 | variant (u32 len + UTF-8) | tensor count u32 |
//   per tensor: name (u32 len + UTF-8) | rank u32 | extents u64[rank] | f64[numel]
struct Checkpoint {
  std::string variant;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  io::put_magic(os, "SGTR");
  io::put_uint<std::uint32_t>(os, kCheckpointVersion);
  io::put_string(os, ck.variant);
  io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    io::put_string(os, name);
    io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) io::put_uint<std::uint64_t>(os, e);
    for (double v : t.storage()) io::put_f64(os, v);
  }
  if (!os) throw FormatError("checkpoint write failed");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  io::expect_magic(is, "SGTR");
  const auto version = io::get_uint<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.variant = io::get_string(is);
  const auto count = io::get_uint<std::uint32_t>(is);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = io::get_string(is);
    const auto rank = io::get_uint<std::uint32_t>(is);
    if (rank > 8) throw FormatError("tensor '" + name + "' has implausible rank " + std::to_string(rank));
    Shape s(rank);
    for (auto& e : s) e = io::get_uint<std::uint64_t>(is);
    const std::size_t n = shape_numel(s);
    if (n > (std::size_t{1} << 32)) throw FormatError("tensor '" + name + "' too large");
    std::vector<double> data(n);
    for (auto& v : data) v = io::get_f64(is);
    ck.tensors.emplace_back(std::move(name), Tensor(std::move(s), std::move(data)));
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_checkpoint(os, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path);
  return read_checkpoint(is);
}

}  // namespace sgtraj
