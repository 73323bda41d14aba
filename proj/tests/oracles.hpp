#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "sgtraj/graph.hpp"
#include "sgtraj/layers.hpp"

// Brute-force reference implementations shared by the unit tests and the
// acceptance run.
namespace sgtraj::oracle {

namespace detail {
inline double lrelu(double v) { return v > 0 ? v : 0.1 * v; }
inline double el(const Tensor& t, std::size_t r, std::size_t c) { return t[r * t.dim(1) + c]; }
}  // namespace detail

// Dense masked-attention GAT: full N×N score matrix, explicit row softmax.
inline Tensor gat_dense_oracle(const GatLayerParams& p, const Tensor& X, const EdgeSet& edges, bool activate) {
  const std::size_t N = X.dim(0), din = X.dim(1), dh = p.head_dim();
  std::vector<std::vector<bool>> mask(N, std::vector<bool>(N, false));
  for (const auto& e : edges.edges) mask[e.dst][e.src] = true;
  Tensor out({N, p.heads.size() * dh});
  for (std::size_t h = 0; h < p.heads.size(); ++h) {
    const Tensor &W = p.heads[h].weight.value(), &a = p.heads[h].attention.value();
    std::vector<std::vector<double>> Z(N, std::vector<double>(dh, 0.0));
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t r = 0; r < dh; ++r)
        for (std::size_t k = 0; k < din; ++k) Z[i][r] += detail::el(W, r, k) * detail::el(X, i, k);
    for (std::size_t i = 0; i < N; ++i) {
      std::vector<double> score(N, -INFINITY);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < N; ++j) {
        if (!mask[i][j]) continue;
        double s = 0.0;
        for (std::size_t r = 0; r < dh; ++r) s += a[r] * Z[i][r] + a[dh + r] * Z[j][r];
        score[j] = detail::lrelu(s);
        mx = std::max(mx, score[j]);
      }
      double den = 0.0;
      for (std::size_t j = 0; j < N; ++j)
        if (mask[i][j]) den += std::exp(score[j] - mx);
      for (std::size_t r = 0; r < dh; ++r) {
        double v = 0.0;
        for (std::size_t j = 0; j < N; ++j)
          if (mask[i][j]) v += std::exp(score[j] - mx) / den * Z[j][r];
        out[i * out.dim(1) + h * dh + r] = activate ? detail::lrelu(v) : v;
      }
    }
  }
  return out;
}

inline EdgeSet random_graph(std::mt19937_64& rng, std::size_t N) {
  EdgeSet es{N, {}};
  for (std::size_t i = 0; i < N; ++i) es.edges.push_back({i, i});
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      if (i != j && rng() % 2) es.edges.push_back({i, j});
  std::shuffle(es.edges.begin(), es.edges.end(), rng);
  return es;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool main_lane(int lane) { return lane >= 1 && lane <= 6; }

// Independent scan: each lane sorted by (y, id), neighbors picked by
// definition.
inline NeighborSlots neighbor_oracle(const Snapshot& s, VehicleId target) {
  const VehicleState* t = nullptr;
  for (const auto& v : s)
    if (v.id == target) t = &v;
  auto lane_sorted = [&](int lane) {
    std::vector<VehicleState> out;
    if (!main_lane(lane)) return out;
    for (const auto& v : s)
      if (v.lane == lane && v.id != target) out.push_back(v);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.y != b.y ? a.y < b.y : a.id < b.id; });
    return out;
  };
  auto preceding = [&](int lane, double y) -> std::optional<VehicleId> {
    auto l = lane_sorted(lane);
    // smallest y strictly greater; among equal y the smallest id comes first
    for (const auto& v : l)
      if (v.y > y) return v.id;
    return std::nullopt;
  };
  auto following = [&](int lane, double y) -> std::optional<VehicleId> {
    auto l = lane_sorted(lane);
    std::optional<VehicleState> best;
    for (const auto& v : l)
      if (v.y < y && (!best || v.y > best->y)) best = v;  // first of the largest-y group has the smallest id
    return best ? std::optional<VehicleId>(best->id) : std::nullopt;
  };
  NeighborSlots out;
  out.slot[0] = preceding(t->lane, t->y);
  out.slot[1] = following(t->lane, t->y);
  for (int side = 0; side < 2; ++side) {
    auto l = lane_sorted(t->lane + (side == 0 ? -1 : 1));
    if (l.empty()) continue;
    std::sort(l.begin(), l.end(), [&](const auto& a, const auto& b) {
      const double da = std::abs(a.y - t->y), db = std::abs(b.y - t->y);
      if (da != db) return da < db;
      if (a.y != b.y) return a.y > b.y;
      return a.id < b.id;
    });
    const auto& adj = l.front();
    out.slot[2 + side] = adj.id;
    out.slot[4 + 2 * side] = preceding(adj.lane, adj.y);
    out.slot[5 + 2 * side] = following(adj.lane, adj.y);
  }
  std::set<VehicleId> seen;
  for (auto& sl : out.slot)
    if (sl && !seen.insert(*sl).second) sl.reset();
  return out;
}

inline Snapshot random_snapshot(std::mt19937_64& rng, std::size_t n) {
  Snapshot s;
  std::vector<VehicleId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<VehicleId>(100 + 7 * i);
  std::shuffle(ids.begin(), ids.end(), rng);
  for (std::size_t i = 0; i < n; ++i) {
    const int lane = 1 + static_cast<int>(rng() % 8);
    // Coarse positions so ties occur.
    const double y = static_cast<double>(rng() % 15) * 2.0;
    s.push_back({ids[i], lane, (lane - 0.5) * 3.66, y});
  }
  return s;
}

}  // namespace sgtraj::oracle
