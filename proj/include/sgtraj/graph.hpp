#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sgtraj/errors.hpp"

namespace sgtraj {

using VehicleId = std::int64_t;

inline constexpr std::size_t kMaxNeighbors = 8;
inline constexpr int kFirstMainLane = 1;
inline constexpr int kLastMainLane = 6;  // lanes 7 and 8 are the ramps

// Directed edge e^{dst,src}: src influences dst.
struct Edge {
  std::size_t dst = 0;
  std::size_t src = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct EdgeSet {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;

  std::size_t size() const { return edges.size(); }

  bool contains(Edge e) const { return std::find(edges.begin(), edges.end(), e) != edges.end(); }

  std::vector<std::size_t> dst_indices() const {
    std::vector<std::size_t> v;
    v.reserve(edges.size());
    for (const auto& e : edges) v.push_back(e.dst);
    return v;
  }

  std::vector<std::size_t> src_indices() const {
    std::vector<std::size_t> v;
    v.reserve(edges.size());
    for (const auto& e : edges) v.push_back(e.src);
    return v;
  }

  // Indices in range, no duplicates.
  void validate() const {
    std::set<Edge> seen;
    for (const auto& e : edges) {
      if (e.dst >= num_nodes || e.src >= num_nodes)
        throw GraphError("edge (" + std::to_string(e.dst) + "," + std::to_string(e.src) +
                         ") references node outside [0," + std::to_string(num_nodes) + ")");
      if (!seen.insert(e).second)
        throw GraphError("duplicate edge (" + std::to_string(e.dst) + "," + std::to_string(e.src) + ")");
    }
  }

  friend bool operator==(const EdgeSet&, const EdgeSet&) = default;
};

// Star graph around node 0 with self-loop: e^{0,j} for j = 0..m, e^{j,0}
// for j = 1..m.
inline EdgeSet build_star_edges(std::size_t m) {
  if (m > kMaxNeighbors)
    throw ContractError("build_star_edges: m = " + std::to_string(m) + " outside [0, 8]");
  EdgeSet es{m + 1, {}};
  es.edges.reserve(2 * m + 1);
  for (std::size_t j = 0; j <= m; ++j) es.edges.push_back({0, j});
  for (std::size_t j = 1; j <= m; ++j) es.edges.push_back({j, 0});
  return es;
}

struct VehicleState {
  VehicleId id = 0;
  int lane = 0;
  double x = 0.0;  // lateral, m
  double y = 0.0;  // longitudinal, m
};

using Snapshot = std::vector<VehicleState>;

// Slot k-1 holds neighbor #k:
//   #1/#2 preceding/following in the target's lane,
//   #3/#4 longitudinally nearest in the left/right adjacent lane,
//   #5/#6 preceding/following of #3, #7/#8 preceding/following of #4.
struct NeighborSlots {
  std::array<std::optional<VehicleId>, kMaxNeighbors> slot;

  // Occupied slots in slot order.
  std::vector<VehicleId> ids() const {
    std::vector<VehicleId> out;
    for (const auto& s : slot)
      if (s) out.push_back(*s);
    return out;
  }

  friend bool operator==(const NeighborSlots&, const NeighborSlots&) = default;
};

namespace detail {

inline bool is_main_lane(int lane) { return lane >= kFirstMainLane && lane <= kLastMainLane; }

inline const VehicleState& find_vehicle(const Snapshot& s, VehicleId id) {
  for (const auto& v : s)
    if (v.id == id) return v;
  throw LookupError("vehicle " + std::to_string(id) + " not in snapshot");
}

// Nearest vehicle strictly ahead (dir > 0) or behind (dir < 0) of `ref` in `lane`.
inline std::optional<VehicleId> in_lane_nearest(const Snapshot& s, int lane, const VehicleState& ref, int dir,
                                                VehicleId exclude) {
  const VehicleState* best = nullptr;
  for (const auto& v : s) {
    if (v.id == exclude || v.id == ref.id || v.lane != lane || !is_main_lane(v.lane)) continue;
    const double d = (v.y - ref.y) * dir;
    if (d <= 0) continue;
    if (!best) {
      best = &v;
      continue;
    }
    const double bd = (best->y - ref.y) * dir;
    if (d < bd || (d == bd && v.id < best->id)) best = &v;
  }
  return best ? std::optional<VehicleId>(best->id) : std::nullopt;
}

// Longitudinally nearest in `lane`; ties prefer the vehicle ahead, then the
// smaller id.
inline const VehicleState* adjacent_nearest(const Snapshot& s, int lane, const VehicleState& ref) {
  if (!is_main_lane(lane)) return nullptr;
  const VehicleState* best = nullptr;
  for (const auto& v : s) {
    if (v.id == ref.id || v.lane != lane) continue;
    if (!best) {
      best = &v;
      continue;
    }
    const double d = std::abs(v.y - ref.y), bd = std::abs(best->y - ref.y);
    if (d < bd || (d == bd && (v.y > best->y || (v.y == best->y && v.id < best->id)))) best = &v;
  }
  return best;
}

inline void check_unique_ids(const Snapshot& s) {
  std::unordered_set<VehicleId> ids;
  for (const auto& v : s)
    if (!ids.insert(v.id).second) throw ContractError("snapshot has duplicate vehicle id " + std::to_string(v.id));
}

}  // namespace detail

inline NeighborSlots select_neighbors(const Snapshot& s, VehicleId target_id) {
  detail::check_unique_ids(s);
  const VehicleState& t = detail::find_vehicle(s, target_id);
  NeighborSlots out;
  out.slot[0] = detail::in_lane_nearest(s, t.lane, t, +1, t.id);
  out.slot[1] = detail::in_lane_nearest(s, t.lane, t, -1, t.id);
  const int side_lane[2] = {t.lane - 1, t.lane + 1};
  for (int side = 0; side < 2; ++side) {
    const VehicleState* a = detail::adjacent_nearest(s, side_lane[side], t);
    if (!a) continue;
    out.slot[2 + side] = a->id;
    out.slot[4 + 2 * side] = detail::in_lane_nearest(s, a->lane, *a, +1, t.id);
    out.slot[5 + 2 * side] = detail::in_lane_nearest(s, a->lane, *a, -1, t.id);
  }
  std::unordered_set<VehicleId> seen;
  for (auto& sl : out.slot)
    if (sl && !seen.insert(*sl).second) sl.reset();
  return out;
}

struct MtpGraph {
  EdgeSet edges;
  std::vector<VehicleId> node_ids;  // node 0 = ego, 1..m = targets, rest = others
  std::size_t num_targets = 0;
};

// Union of per-target star patterns plus a self-loop on every node. Each
// target k is connected both ways to those of its own neighbors (per
// select_neighbors on `s`) that are in the graph.
inline MtpGraph build_mtp_graph(const Snapshot& s, VehicleId ego_id, const std::vector<VehicleId>& target_ids,
                                const std::vector<VehicleId>& other_ids) {
  if (target_ids.empty() || target_ids.size() > kMaxNeighbors)
    throw ContractError("build_mtp_graph: target count " + std::to_string(target_ids.size()) +
                        " outside [1, 8]");
  MtpGraph g;
  g.num_targets = target_ids.size();
  g.node_ids.push_back(ego_id);
  g.node_ids.insert(g.node_ids.end(), target_ids.begin(), target_ids.end());
  g.node_ids.insert(g.node_ids.end(), other_ids.begin(), other_ids.end());
  std::unordered_map<VehicleId, std::size_t> node_of;
  for (std::size_t i = 0; i < g.node_ids.size(); ++i)
    if (!node_of.emplace(g.node_ids[i], i).second)
      throw ContractError("build_mtp_graph: vehicle " + std::to_string(g.node_ids[i]) + " listed twice");

  g.edges.num_nodes = g.node_ids.size();
  std::set<Edge> seen;
  auto push = [&](std::size_t dst, std::size_t src) {
    if (seen.insert({dst, src}).second) g.edges.edges.push_back({dst, src});
  };
  for (std::size_t i = 0; i < g.node_ids.size(); ++i) push(i, i);
  for (std::size_t k = 1; k <= g.num_targets; ++k) {
    for (VehicleId nid : select_neighbors(s, g.node_ids[k]).ids()) {
      auto it = node_of.find(nid);
      if (it == node_of.end()) continue;
      push(k, it->second);
      push(it->second, k);
    }
  }
  return g;
}

}  // namespace sgtraj
