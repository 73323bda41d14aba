#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "sgtraj/model.hpp"

namespace sgtraj::testing {

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return Tensor::uniform(std::move(s), lo, hi, rng);
}

// STP sample with m random neighbors and plausible coordinates (m).
inline Sample random_stp_sample(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> lat(-4.0, 4.0), lon(-30.0, 30.0), step(0.5, 2.0);
  Sample s;
  for (std::size_t n = 0; n <= m; ++n) {
    History h;
    const double x0 = n == 0 ? 0.0 : lat(rng), y0 = n == 0 ? 0.0 : lon(rng), v = step(rng);
    for (std::size_t t = 0; t < kHistoryLen; ++t) {
      const double back = static_cast<double>(kHistoryLen - 1 - t);
      h[t] = {x0 + 0.01 * back * lat(rng) * (n == 0 ? 0.0 : 1.0), y0 - v * back};
    }
    s.histories.push_back(h);
  }
  s.edges = build_star_edges(m);
  s.target_nodes = {0};
  Future f;
  for (std::size_t k = 0; k < kFutureLen; ++k) f[k] = {0.1 * static_cast<double>(k), 2.0 * static_cast<double>(k + 1)};
  s.futures = {f};
  s.meta.segment = "random";
  return s;
}

// MTP-shaped sample: node 0 ego, nodes 1..targets predicted, star-like
// edges plus self-loops.
inline Sample random_mtp_sample(std::mt19937_64& rng, std::size_t targets, std::size_t others) {
  Sample s = random_stp_sample(rng, targets + others);
  s.edges = EdgeSet{targets + others + 1, {}};
  for (std::size_t i = 0; i <= targets + others; ++i) s.edges.edges.push_back({i, i});
  for (std::size_t k = 1; k <= targets; ++k) {
    s.edges.edges.push_back({0, k});
    s.edges.edges.push_back({k, 0});
  }
  for (std::size_t o = targets + 1; o <= targets + others; ++o) {
    s.edges.edges.push_back({1, o});
    s.edges.edges.push_back({o, 1});
  }
  s.target_nodes.clear();
  s.futures.clear();
  for (std::size_t k = 1; k <= targets; ++k) {
    s.target_nodes.push_back(k);
    s.futures.push_back(s.futures.empty() ? Future{} : s.futures.back());
  }
  return s;
}

}  // namespace sgtraj::testing
