#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "sgtraj/binary_io.hpp"
#include "sgtraj/graph.hpp"

namespace sgtraj {

// Raw data is sampled at 10 Hz. Histories keep every 2nd frame over 3 s
// (current frame included), futures every 5th frame over 5 s.
inline constexpr std::size_t kHistoryLen = 16;
inline constexpr std::size_t kFutureLen = 10;
inline constexpr std::int64_t kHistoryStride = 2;
inline constexpr std::int64_t kFutureStride = 5;
inline constexpr double kFrameSeconds = 0.1;

// Future index (0-based) holding horizon t_p seconds, t_p in 1..5.
inline std::size_t horizon_index(int seconds) {
  if (seconds < 1 || seconds > 5) throw ContractError("horizon must be in 1..5 s, got " + std::to_string(seconds));
  return static_cast<std::size_t>(2 * seconds - 1);
}

struct Point {
  double x = 0.0;  // lateral, m
  double y = 0.0;  // longitudinal, m
  friend bool operator==(const Point&, const Point&) = default;
};

using History = std::array<Point, kHistoryLen>;
using Future = std::array<Point, kFutureLen>;

enum class Maneuver : std::uint8_t { kUnknown = 0, kKeep = 1, kLeft = 2, kRight = 3 };

inline const char* maneuver_name(Maneuver m) {
  switch (m) {
    case Maneuver::kKeep: return "keep";
    case Maneuver::kLeft: return "left";
    case Maneuver::kRight: return "right";
    default: return "unknown";
  }
}

struct SampleMeta {
  std::string segment;
  VehicleId target_id = 0;  // the STP target, or the ego vehicle for MTP
  std::int64_t frame = 0;   // current frame t
  double origin_x = 0.0;    // world position subtracted from all coordinates
  double origin_y = 0.0;
  Maneuver maneuver = Maneuver::kUnknown;
  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

// One record {H_t, E_t, y_t} in the frame centred on node 0's current
// position. STP records predict node 0; MTP records predict nodes 1..m.
struct Sample {
  std::vector<History> histories;
  EdgeSet edges;
  std::vector<std::size_t> target_nodes;
  std::vector<Future> futures;  // parallel to target_nodes
  SampleMeta meta;

  std::size_t num_vehicles() const { return histories.size(); }
  bool is_stp() const { return target_nodes.size() == 1 && target_nodes[0] == 0; }

  void validate() const {
    auto fail = [](const std::string& what) { throw ContractError("invalid sample: " + what); };
    if (histories.empty()) fail("no vehicles");
    if (is_stp() && histories.size() > 1 + kMaxNeighbors) fail("more than 9 vehicles in an STP sample");
    if (histories[0].back() != Point{0.0, 0.0}) fail("node 0 current position is not the origin");
    if (target_nodes.empty() || target_nodes.size() != futures.size()) fail("targets and futures disagree");
    if (edges.num_nodes != histories.size()) fail("edge set node count differs from vehicle count");
    edges.validate();
    for (std::size_t t : target_nodes)
      if (t >= histories.size()) fail("target node out of range");
    for (const auto& h : histories)
      for (const auto& p : h)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) fail("non-finite history");
    for (const auto& f : futures)
      for (const auto& p : f)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) fail("non-finite future");
  }

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Dataset file, little-endian:
//   "SGDS" | version u32 | sample count u64 | per sample:
//     vehicle count u32 | per vehicle 16×(x,y) f64 |
//     edge count u32 | per edge (dst u16, src u16) |
//     target count u32 | per target: node u16, 10×(x,y) f64 |
//     segment (u32 len + UTF-8) | target id i64 | frame i64 | origin x,y f64 | maneuver u8
inline constexpr std::uint32_t kDatasetVersion = 1;

inline void write_sample(std::ostream& os, const Sample& s) {
  if (s.histories.size() > 0xffff) throw ContractError("too many vehicles for u16 edge indices");
  io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(s.histories.size()));
  for (const auto& h : s.histories)
    for (const auto& p : h) {
      io::put_f64(os, p.x);
      io::put_f64(os, p.y);
    }
  io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(s.edges.size()));
  for (const auto& e : s.edges.edges) {
    io::put_uint<std::uint16_t>(os, static_cast<std::uint16_t>(e.dst));
    io::put_uint<std::uint16_t>(os, static_cast<std::uint16_t>(e.src));
  }
  io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(s.target_nodes.size()));
  for (std::size_t k = 0; k < s.target_nodes.size(); ++k) {
    io::put_uint<std::uint16_t>(os, static_cast<std::uint16_t>(s.target_nodes[k]));
    for (const auto& p : s.futures[k]) {
      io::put_f64(os, p.x);
      io::put_f64(os, p.y);
    }
  }
  io::put_string(os, s.meta.segment);
  io::put_i64(os, s.meta.target_id);
  io::put_i64(os, s.meta.frame);
  io::put_f64(os, s.meta.origin_x);
  io::put_f64(os, s.meta.origin_y);
  io::put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(s.meta.maneuver));
}

inline Sample read_sample(std::istream& is) {
  Sample s;
  const auto nv = io::get_uint<std::uint32_t>(is);
  if (nv == 0 || nv > 0xffff) throw FormatError("implausible vehicle count " + std::to_string(nv));
  s.histories.resize(nv);
  for (auto& h : s.histories)
    for (auto& p : h) {
      p.x = io::get_f64(is);
      p.y = io::get_f64(is);
    }
  s.edges.num_nodes = nv;
  const auto ne = io::get_uint<std::uint32_t>(is);
  if (static_cast<std::uint64_t>(ne) > static_cast<std::uint64_t>(nv) * nv)
    throw FormatError("implausible edge count " + std::to_string(ne));
  s.edges.edges.resize(ne);
  for (auto& e : s.edges.edges) {
    e.dst = io::get_uint<std::uint16_t>(is);
    e.src = io::get_uint<std::uint16_t>(is);
  }
  const auto nt = io::get_uint<std::uint32_t>(is);
  if (nt > nv) throw FormatError("more targets than vehicles");
  s.target_nodes.resize(nt);
  s.futures.resize(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    s.target_nodes[k] = io::get_uint<std::uint16_t>(is);
    for (auto& p : s.futures[k]) {
      p.x = io::get_f64(is);
      p.y = io::get_f64(is);
    }
  }
  s.meta.segment = io::get_string(is);
  s.meta.target_id = io::get_i64(is);
  s.meta.frame = io::get_i64(is);
  s.meta.origin_x = io::get_f64(is);
  s.meta.origin_y = io::get_f64(is);
  const auto m = io::get_uint<std::uint8_t>(is);
  if (m > static_cast<std::uint8_t>(Maneuver::kRight)) throw FormatError("unknown maneuver code " + std::to_string(m));
  s.meta.maneuver = static_cast<Maneuver>(m);
  return s;
}

inline void write_dataset(std::ostream& os, const std::vector<Sample>& samples) {
  io::put_magic(os, "SGDS");
  io::put_uint<std::uint32_t>(os, kDatasetVersion);
  io::put_uint<std::uint64_t>(os, samples.size());
  for (const auto& s : samples) write_sample(os, s);
  if (!os) throw FormatError("dataset write failed");
}

inline std::vector<Sample> read_dataset(std::istream& is) {
  io::expect_magic(is, "SGDS");
  const auto version = io::get_uint<std::uint32_t>(is);
  if (version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  const auto n = io::get_uint<std::uint64_t>(is);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
  for (std::uint64_t i = 0; i < n; ++i) {
    try {
      out.push_back(read_sample(is));
    } catch (const FormatError& e) {
      throw FormatError("sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

inline void save_dataset(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_dataset(os, samples);
}

inline std::vector<Sample> load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open dataset " + path);
  try {
    return read_dataset(is);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace sgtraj
