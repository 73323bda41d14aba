#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sgtraj/model.hpp"
#include "sgtraj/sample.hpp"

namespace sgtraj {

inline constexpr std::array<int, 5> kHorizonsSeconds = {1, 2, 3, 4, 5};

namespace detail {

inline void check_aligned(std::span<const Prediction> preds, std::span<const Future> truths) {
  if (preds.size() != truths.size())
    throw ContractError("metric: " + std::to_string(preds.size()) + " predictions vs " + std::to_string(truths.size()) +
                        " ground truths");
  if (preds.empty()) throw ContractError("metric: empty evaluation set");
}

}  // namespace detail

// Per-sample Euclidean error at horizon t_p.
inline std::vector<double> horizon_errors(std::span<const Prediction> preds, std::span<const Future> truths, int t_p) {
  detail::check_aligned(preds, truths);
  const std::size_t k = horizon_index(t_p);
  std::vector<double> e(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    e[i] = std::hypot(preds[i][k].x - truths[i][k].x, preds[i][k].y - truths[i][k].y);
  return e;
}

// sqrt(mean of squared Euclidean error at t_p).
inline double rmse_horizon(std::span<const Prediction> preds, std::span<const Future> truths, int t_p) {
  detail::check_aligned(preds, truths);
  const std::size_t k = horizon_index(t_p);
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double dx = preds[i][k].x - truths[i][k].x, dy = preds[i][k].y - truths[i][k].y;
    acc += dx * dx + dy * dy;
  }
  return std::sqrt(acc / static_cast<double>(preds.size()));
}

struct BoxStats {
  std::vector<double> errors;
  double mean = 0.0;
};

// Mean of per-sample Euclidean errors (the box-plot mean, not an RMS).
inline BoxStats boxplot_mean(std::span<const Prediction> preds, std::span<const Future> truths, int t_p) {
  BoxStats b;
  b.errors = horizon_errors(preds, truths, t_p);
  double acc = 0.0;
  for (double e : b.errors) acc += e;
  b.mean = acc / static_cast<double>(b.errors.size());
  return b;
}

// Extrapolates the last history step: one 5 Hz step scaled by 2.5 gives
// the displacement per 2 Hz future step.
inline Future constant_velocity(const History& h) {
  const Point last = h[kHistoryLen - 1], prev = h[kHistoryLen - 2];
  const double ratio = static_cast<double>(kFutureStride) / static_cast<double>(kHistoryStride);
  const double vx = (last.x - prev.x) * ratio, vy = (last.y - prev.y) * ratio;
  Future f;
  for (std::size_t k = 0; k < kFutureLen; ++k) {
    const double n = static_cast<double>(k + 1);
    f[k] = {last.x + vx * n, last.y + vy * n};
  }
  return f;
}

// One prediction per target node of the sample.
inline std::vector<Prediction> constant_velocity_baseline(const Sample& s) {
  std::vector<Prediction> out;
  for (std::size_t node : s.target_nodes) out.push_back(constant_velocity(s.histories.at(node)));
  return out;
}

struct EvalReport {
  std::string name;
  std::size_t count = 0;
  std::array<double, 5> rmse{};
  std::array<double, 5> boxmean{};
  std::array<std::vector<double>, 5> errors;
};

inline EvalReport make_report(std::string name, std::span<const Prediction> preds, std::span<const Future> truths) {
  EvalReport r;
  r.name = std::move(name);
  r.count = preds.size();
  for (std::size_t h = 0; h < kHorizonsSeconds.size(); ++h) {
    r.rmse[h] = rmse_horizon(preds, truths, kHorizonsSeconds[h]);
    auto b = boxplot_mean(preds, truths, kHorizonsSeconds[h]);
    r.boxmean[h] = b.mean;
    r.errors[h] = std::move(b.errors);
  }
  return r;
}

// Ground truths in the same order predict_all / the baseline emit them.
inline std::vector<Future> flatten_truths(const std::vector<Sample>& samples) {
  std::vector<Future> out;
  for (const auto& s : samples) out.insert(out.end(), s.futures.begin(), s.futures.end());
  return out;
}

inline std::vector<Prediction> baseline_predictions(const std::vector<Sample>& samples) {
  std::vector<Prediction> out;
  for (const auto& s : samples) {
    auto p = constant_velocity_baseline(s);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

inline EvalReport evaluate(const ModelParams& p, const std::vector<Sample>& set) {
  if (set.empty()) throw ContractError("evaluate: empty evaluation set");
  for (const auto& s : set)
    if (s.edges.num_nodes != s.histories.size()) throw ContractError("evaluate: sample edge set inconsistent");
  const auto preds = predict_all(p, set);
  const auto truths = flatten_truths(set);
  return make_report(variant_name(p.variant), preds, truths);
}

inline EvalReport evaluate_baseline(const std::vector<Sample>& set) {
  if (set.empty()) throw ContractError("evaluate: empty evaluation set");
  return make_report("constant_velocity", baseline_predictions(set), flatten_truths(set));
}

inline bool is_lane_change(const Sample& s) {
  return s.meta.maneuver == Maneuver::kLeft || s.meta.maneuver == Maneuver::kRight;
}

// Tab-separated table, one row per report, columns 1..5 s.
inline void write_report_table(std::ostream& os, const std::vector<EvalReport>& rows, bool boxmean = false) {
  os << "method\tcount";
  for (int s : kHorizonsSeconds) os << '\t' << s << "s";
  os << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << r.name << '\t' << r.count;
    for (double v : (boxmean ? r.boxmean : r.rmse)) os << '\t' << v;
    os << '\n';
  }
  os.unsetf(std::ios::floatfield);
}

// One error per line for a single horizon.
inline void write_errors(std::ostream& os, const EvalReport& r, std::size_t horizon_slot) {
  os << std::setprecision(17);
  for (double e : r.errors.at(horizon_slot)) os << e << '\n';
}

}  // namespace sgtraj
