#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "sgtraj/autodiff.hpp"

namespace sgtraj {

struct GradCheckOptions {
  double eps = 1e-5;
  // Entries probed per parameter tensor; 0 probes every entry.
  std::size_t entries_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t probed = 0;
};

// Compares reverse-mode gradients of `fn` against central differences.
// Per parameter tensor the error is max|analytic - cd| over the probed
// entries divided by the tensor's gradient scale max(|analytic|, |cd|);
// the result is the largest such ratio. Entries with near-zero gradient are
// judged against their tensor's scale, where finite-difference rounding
// noise would otherwise dominate. `fn` builds its computation on the tape it is given and must be
// deterministic for fixed parameter values.
inline GradCheckResult grad_check_detailed(const std::function<Var(Tape&)>& fn, std::vector<Var> params,
                                           const GradCheckOptions& opt = {}) {
  for (auto& p : params) p.zero_grad();
  {
    Tape tape;
    tape.backward(fn(tape));
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  auto eval = [&fn]() {
    Tape tape(false);
    return fn(tape).value().item();
  };

  std::mt19937_64 rng(opt.seed);
  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& vals = params[k].mutable_value().storage();
    std::vector<std::size_t> idx(vals.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opt.entries_per_param && opt.entries_per_param < idx.size()) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opt.entries_per_param);
    }
    double max_diff = 0.0, scale = 1e-12;
    for (double a : analytic[k].storage()) scale = std::max(scale, std::abs(a));
    for (std::size_t i : idx) {
      const double orig = vals[i];
      vals[i] = orig + opt.eps;
      const double fp = eval();
      vals[i] = orig - opt.eps;
      const double fm = eval();
      vals[i] = orig;
      const double cd = (fp - fm) / (2.0 * opt.eps);
      max_diff = std::max(max_diff, std::abs(analytic[k][i] - cd));
      scale = std::max(scale, std::abs(cd));
      ++res.probed;
    }
    res.max_rel_err = std::max(res.max_rel_err, max_diff / scale);
  }
  return res;
}

inline double grad_check(const std::function<Var(Tape&)>& fn, std::vector<Var> params,
                         double eps = 1e-5) {
  return grad_check_detailed(fn, std::move(params), GradCheckOptions{.eps = eps}).max_rel_err;
}

}  // namespace sgtraj
