#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sgtraj/metrics.hpp"
#include "sgtraj/model.hpp"

namespace sgtraj {

// ---------------------------------------------------------------------------
// Loss

// Mean over steps × coordinates of the squared error (m²).
inline double mse_value(const Prediction& pred, const Future& truth) {
  double acc = 0.0;
  for (std::size_t k = 0; k < kFutureLen; ++k) {
    const double dx = pred[k].x - truth[k].x, dy = pred[k].y - truth[k].y;
    acc += dx * dx + dy * dy;
  }
  return acc / static_cast<double>(2 * kFutureLen);
}

// `pred` is [10×2].
inline Var mse_loss(Tape& tape, const Var& pred, const Future& truth) {
  const Tensor& p = pred.value();
  if (p.rank() != 2 || p.dim(0) != kFutureLen || p.dim(1) != 2)
    throw ContractError("mse_loss: prediction " + shape_str(p.shape()) + " vs " + std::to_string(kFutureLen) +
                        " ground-truth steps");
  Tensor t({kFutureLen, 2});
  for (std::size_t k = 0; k < kFutureLen; ++k) {
    t.at(k, 0) = truth[k].x;
    t.at(k, 1) = truth[k].y;
  }
  return mean(tape, square(tape, sub(tape, pred, tape.constant(std::move(t)))));
}

// Sum over targets of each target's MSE, from the per-step [T×2] outputs of
// `forward`.
inline Var summed_mse(Tape& tape, const std::vector<Var>& steps, const std::vector<const Future*>& truths) {
  if (steps.size() != kFutureLen) throw ContractError("summed_mse: expected " + std::to_string(kFutureLen) + " steps");
  std::vector<Var> parts;
  parts.reserve(steps.size());
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const std::size_t T = steps[k].value().dim(0);
    if (T != truths.size()) throw ContractError("summed_mse: prediction / ground-truth count mismatch");
    Tensor t({T, 2});
    for (std::size_t i = 0; i < T; ++i) {
      t.at(i, 0) = (*truths[i])[k].x;
      t.at(i, 1) = (*truths[i])[k].y;
    }
    parts.push_back(sum(tape, square(tape, sub(tape, steps[k], tape.constant(std::move(t))))));
  }
  Var total = parts[0];
  for (std::size_t k = 1; k < parts.size(); ++k) total = add(tape, total, parts[k]);
  return scale(tape, total, 1.0 / static_cast<double>(2 * kFutureLen));
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// One bias-corrected Adam update in place. Moments are created on the first
// call.
inline void adam_step(AdamState& s, std::vector<Var>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size())
    throw ContractError("adam_step: " + std::to_string(params.size()) + " parameters vs " +
                        std::to_string(grads.size()) + " gradients");
  if (s.m.empty() && s.v.empty()) {
    for (const auto& p : params) {
      s.m.emplace_back(p.shape(), 0.0);
      s.v.emplace_back(p.shape(), 0.0);
    }
  }
  if (s.m.size() != params.size() || s.v.size() != params.size())
    throw ContractError("adam_step: moment count differs from parameter count");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].shape() != grads[i].shape() || s.m[i].shape() != grads[i].shape() ||
        s.v[i].shape() != grads[i].shape())
      throw ContractError("adam_step: shape mismatch at parameter " + std::to_string(i) + ": " +
                          shape_str(params[i].shape()) + " vs gradient " + shape_str(grads[i].shape()));

  ++s.step;
  const auto& c = s.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].mutable_value().storage();
    auto& m = s.m[i].storage();
    auto& v = s.v[i].storage();
    const auto& g = grads[i].storage();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      w[j] -= c.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + c.eps);
    }
  }
}

// Rescales all gradients together when their global L2 norm exceeds `max_norm`.
inline double clip_grad_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double x : g.storage()) sq += x * x;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& g : grads)
      for (double& x : g.storage()) x *= f;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Batch gradients

struct BatchGradient {
  double loss = 0.0;       // mean per-target MSE over the batch
  std::size_t targets = 0;
  std::vector<Tensor> grads;  // of the mean loss, in ModelParams::parameters() order
};

namespace detail {

struct ChunkResult {
  double loss_sum = 0.0;
  std::size_t targets = 0;
  std::vector<Tensor> grads;  // of the summed loss
};

inline ChunkResult chunk_gradient(const ModelParams& shared, std::span<const Sample* const> samples, bool own_copy) {
  ModelParams p = own_copy ? shared.clone() : shared;
  p.zero_grad();
  Batch b(samples);
  Tape tape;
  Var loss = summed_mse(tape, forward(tape, p, b), b.truths);
  tape.backward(loss);
  ChunkResult r;
  r.loss_sum = loss.value().item();
  r.targets = b.target_rows.size();
  for (const Var& v : p.parameters()) r.grads.push_back(v.grad());
  if (!own_copy) p.zero_grad();
  return r;
}

inline void accumulate(ChunkResult& into, const ChunkResult& c) {
  if (into.grads.empty()) {
    into = c;
    return;
  }
  into.loss_sum += c.loss_sum;
  into.targets += c.targets;
  for (std::size_t i = 0; i < c.grads.size(); ++i) {
    auto& a = into.grads[i].storage();
    const auto& b = c.grads[i].storage();
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
  }
}

}  // namespace detail

// Splits the batch into `workers` contiguous chunks. Deterministic mode
// joins all chunks and reduces them in chunk order; otherwise chunks are
// folded in as they finish.
inline BatchGradient batch_gradient(const ModelParams& p, std::span<const Sample* const> samples,
                                    std::size_t workers = 1, bool deterministic = true) {
  if (samples.empty()) throw ContractError("batch_gradient: empty batch");
  const std::size_t chunks = std::clamp<std::size_t>(workers, 1, samples.size());
  detail::ChunkResult total;
  if (chunks == 1) {
    total = detail::chunk_gradient(p, samples, /*own_copy=*/false);
  } else {
    std::vector<std::span<const Sample* const>> parts;
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t lo = samples.size() * c / chunks, hi = samples.size() * (c + 1) / chunks;
      parts.push_back(samples.subspan(lo, hi - lo));
    }
    std::vector<detail::ChunkResult> results(chunks);
    std::vector<std::exception_ptr> errors(chunks);
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t c = 0; c < chunks; ++c)
      pool.emplace_back([&, c] {
        try {
          auto r = detail::chunk_gradient(p, parts[c], /*own_copy=*/true);
          if (deterministic) {
            results[c] = std::move(r);
          } else {
            std::lock_guard<std::mutex> lock(mu);
            detail::accumulate(total, r);
          }
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    if (deterministic)
      for (const auto& r : results) detail::accumulate(total, r);
  }
  BatchGradient out;
  out.targets = total.targets;
  const double inv = 1.0 / static_cast<double>(total.targets);
  out.loss = total.loss_sum * inv;
  out.grads = std::move(total.grads);
  for (auto& g : out.grads)
    for (double& x : g.storage()) x *= inv;
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainOptions {
  std::size_t epochs = 50;
  std::size_t batch = 128;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool deterministic = true;
  double clip_norm = 0.0;  // 0 disables clipping
  AdamConfig adam;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_rmse_5s;
};

struct TrainState {
  ModelParams params;
  AdamState adam;
  std::size_t epochs_done = 0;
  std::vector<EpochStats> curve;
  std::optional<ModelParams> best;  // best validation RMSE@5s so far
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
};

inline TrainState start_training(ModelParams params, const AdamConfig& adam = {}) {
  TrainState st;
  st.params = std::move(params);
  st.adam.cfg = adam;
  return st;
}

using EpochHook = std::function<void(const TrainState&)>;

namespace detail {

inline std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5348u};
  return std::mt19937_64(seq);
}

}  // namespace detail

// Continues `st` up to `opt.epochs`. After every epoch the validation set
// (if any) is scored and `hook` runs, which is where callers checkpoint.
inline void train(TrainState& st, const std::vector<Sample>& train_set, const std::vector<Sample>* val_set,
                  const TrainOptions& opt, const EpochHook& hook = {}) {
  if (train_set.empty()) throw ContractError("train: empty training set");
  if (opt.batch == 0) throw ContractError("train: batch size must be positive");
  st.adam.cfg = opt.adam;
  std::vector<std::size_t> order(train_set.size());
  std::vector<const Sample*> batch;
  while (st.epochs_done < opt.epochs) {
    const std::size_t epoch = st.epochs_done + 1;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto rng = detail::epoch_rng(opt.seed, epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_acc = 0.0;
    std::size_t batches = 0;
    auto params = st.params.parameters();
    for (std::size_t i = 0; i < order.size(); i += opt.batch) {
      batch.clear();
      for (std::size_t j = i; j < std::min(order.size(), i + opt.batch); ++j) batch.push_back(&train_set[order[j]]);
      BatchGradient g = batch_gradient(st.params, batch, opt.workers, opt.deterministic);
      if (opt.clip_norm > 0.0) clip_grad_norm(g.grads, opt.clip_norm);
      adam_step(st.adam, params, g.grads);
      loss_acc += g.loss;
      ++batches;
    }

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = loss_acc / static_cast<double>(batches);
    if (val_set && !val_set->empty()) {
      const auto preds = predict_all(st.params, *val_set);
      es.val_rmse_5s = rmse_horizon(preds, flatten_truths(*val_set), 5);
      if (*es.val_rmse_5s < st.best_val) {
        st.best_val = *es.val_rmse_5s;
        st.best_epoch = epoch;
        st.best = st.params.clone();
      }
    }
    st.curve.push_back(es);
    st.epochs_done = epoch;
    if (hook) hook(st);
  }
}

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> curve;
};

inline TrainResult train(ModelParams params, const std::vector<Sample>& train_set, const TrainOptions& opt = {}) {
  TrainState st = start_training(std::move(params), opt.adam);
  train(st, train_set, nullptr, opt);
  return {std::move(st.params), std::move(st.curve)};
}

// ---------------------------------------------------------------------------
// Resumable training checkpoints: model tensors plus optimizer moments,
// counters and the loss curve.

inline Checkpoint training_checkpoint(const TrainState& st) {
  Checkpoint ck = st.params.to_checkpoint();
  ModelParams view = st.params;
  std::vector<std::string> names;
  view.visit([&](const std::string& n, Var&) { names.push_back(n); });
  for (std::size_t i = 0; i < st.adam.m.size(); ++i) {
    ck.tensors.emplace_back("adam.m." + names.at(i), st.adam.m[i]);
    ck.tensors.emplace_back("adam.v." + names.at(i), st.adam.v[i]);
  }
  ck.tensors.emplace_back("train.step", Tensor::vector({static_cast<double>(st.adam.step)}));
  ck.tensors.emplace_back("train.epoch", Tensor::vector({static_cast<double>(st.epochs_done)}));
  ck.tensors.emplace_back("train.best", Tensor::vector({st.best_val, static_cast<double>(st.best_epoch)}));
  if (!st.curve.empty()) {
    Tensor curve({st.curve.size(), 2});
    for (std::size_t i = 0; i < st.curve.size(); ++i) {
      curve.at(i, 0) = st.curve[i].train_loss;
      curve.at(i, 1) = st.curve[i].val_rmse_5s.value_or(std::numeric_limits<double>::quiet_NaN());
    }
    ck.tensors.emplace_back("train.curve", std::move(curve));
  }
  return ck;
}

// `best` is the separately stored best-validation model, if any.
inline TrainState resume_training(const Checkpoint& ck, std::optional<ModelParams> best = std::nullopt) {
  TrainState st;
  st.params = ModelParams::from_checkpoint(ck);
  std::vector<std::string> names;
  st.params.visit([&](const std::string& n, Var&) { names.push_back(n); });
  auto scalar = [&](const std::string& name, std::size_t i = 0) {
    const Tensor* t = ck.find(name);
    if (!t || t->numel() <= i) throw ConfigError("checkpoint has no training state '" + name + "'");
    return (*t)[i];
  };
  st.adam.step = static_cast<std::int64_t>(scalar("train.step"));
  st.epochs_done = static_cast<std::size_t>(scalar("train.epoch"));
  st.best_val = scalar("train.best", 0);
  st.best_epoch = static_cast<std::size_t>(scalar("train.best", 1));
  if (st.adam.step > 0) {
    for (const auto& n : names) {
      const Tensor* m = ck.find("adam.m." + n);
      const Tensor* v = ck.find("adam.v." + n);
      if (!m || !v) throw ConfigError("checkpoint is missing optimizer moments for '" + n + "'");
      st.adam.m.push_back(*m);
      st.adam.v.push_back(*v);
    }
  }
  if (const Tensor* c = ck.find("train.curve")) {
    for (std::size_t i = 0; i < c->dim(0); ++i) {
      EpochStats es;
      es.epoch = i + 1;
      es.train_loss = c->at(i, 0);
      if (!std::isnan(c->at(i, 1))) es.val_rmse_5s = c->at(i, 1);
      st.curve.push_back(es);
    }
  }
  st.best = std::move(best);
  return st;
}

// CSV: epoch,train_loss,val_rmse_5s (empty when no validation set).
inline void write_loss_curve(std::ostream& os, const std::vector<EpochStats>& curve) {
  os << "epoch,train_loss,val_rmse_5s\n" << std::setprecision(10);
  for (const auto& e : curve) {
    os << e.epoch << ',' << e.train_loss << ',';
    if (e.val_rmse_5s) os << *e.val_rmse_5s;
    os << '\n';
  }
}

}  // namespace sgtraj
