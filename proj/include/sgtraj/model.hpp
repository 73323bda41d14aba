#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sgtraj/checkpoint.hpp"
#include "sgtraj/layers.hpp"
#include "sgtraj/sample.hpp"

namespace sgtraj {

enum class Variant { kTwoChannel, kDynamicsOnly, kInteractionOnly };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kDynamicsOnly: return "dynamics_only";
    case Variant::kInteractionOnly: return "interaction_only";
    default: return "two_channel";
  }
}

inline Variant parse_variant(const std::string& s) {
  if (s == "two_channel") return Variant::kTwoChannel;
  if (s == "dynamics_only") return Variant::kDynamicsOnly;
  if (s == "interaction_only") return Variant::kInteractionOnly;
  throw ConfigError("unknown variant '" + s + "' (two_channel, dynamics_only, interaction_only)");
}

struct ModelConfig {
  std::size_t emb_dim = 32;
  std::size_t gru_hidden = 32;
  std::size_t gat_head_dim = 32;
  std::size_t dec_hidden = 64;
  // Coordinates are divided by these on the way in and multiplied on the way
  // out, so the network works with O(1) values. Lane offsets are a few
  // meters while longitudinal gaps reach tens of meters, hence two scales.
  double lateral_scale = 2.0;
  double longitudinal_scale = 10.0;
};

struct ModelParams {
  Variant variant = Variant::kTwoChannel;
  double lateral_scale = 2.0;
  double longitudinal_scale = 10.0;
  LinearParams emb;
  GruParams gru;
  GatLayerParams gat1;
  GatLayerParams gat2;
  LstmParams dec;
  LinearParams head;

  static std::size_t context_dim(Variant v, std::size_t gru_hidden, std::size_t gat_out) {
    switch (v) {
      case Variant::kDynamicsOnly: return gru_hidden;
      case Variant::kInteractionOnly: return gat_out;
      default: return gat_out + gru_hidden;
    }
  }

  static ModelParams init(Variant v, std::uint64_t seed, const ModelConfig& c = {}) {
    std::mt19937_64 rng(seed);
    ModelParams p;
    p.variant = v;
    p.lateral_scale = c.lateral_scale;
    p.longitudinal_scale = c.longitudinal_scale;
    p.emb = LinearParams::init(2, c.emb_dim, rng);
    p.gru = GruParams::init(c.emb_dim, c.gru_hidden, rng);
    p.gat1 = GatLayerParams::init(c.gru_hidden, c.gat_head_dim, rng);
    p.gat2 = GatLayerParams::init(kGatHeads * c.gat_head_dim, c.gat_head_dim, rng);
    p.dec = LstmParams::init(context_dim(v, c.gru_hidden, kGatHeads * c.gat_head_dim), c.dec_hidden, rng);
    p.head = LinearParams::init(c.dec_hidden, 2, rng);
    return p;
  }

  std::size_t context_dim() const { return context_dim(variant, gru.hidden(), gat2.out_dim()); }

  template <class F>
  void visit(F&& f) {
    emb.visit("emb", f);
    gru.visit("gru", f);
    gat1.visit("gat1", f);
    gat2.visit("gat2", f);
    dec.visit("dec", f);
    head.visit("head", f);
  }

  std::vector<Var> parameters() {
    std::vector<Var> out;
    visit([&](const std::string&, Var& v) { out.push_back(v); });
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    visit([&](const std::string&, Var& v) { n += v.value().numel(); });
    return n;
  }

  // Independent leaves with copied values (for per-worker gradients).
  ModelParams clone() const {
    ModelParams c = *this;
    c.visit([](const std::string&, Var& v) { v = leaf(v.value()); });
    return c;
  }

  void zero_grad() {
    visit([](const std::string&, Var& v) { v.zero_grad(); });
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.variant = variant_name(variant);
    ck.tensors.emplace_back("meta.position_scale", Tensor::vector({lateral_scale, longitudinal_scale}));
    ModelParams view = *this;  // shares the leaves
    view.visit([&](const std::string& name, Var& v) { ck.tensors.emplace_back(name, v.value()); });
    return ck;
  }

  static ModelParams from_checkpoint(const Checkpoint& ck) {
    const Variant v = parse_variant(ck.variant);
    auto need = [&](const std::string& name) -> const Tensor& {
      const Tensor* t = ck.find(name);
      if (!t) throw ConfigError("checkpoint is missing tensor '" + name + "'");
      return *t;
    };
    ModelConfig c;
    const Tensor& sc = need("meta.position_scale");
    if (sc.numel() != 2) throw ConfigError("checkpoint meta.position_scale must hold 2 values");
    c.lateral_scale = sc[0];
    c.longitudinal_scale = sc[1];
    c.emb_dim = need("emb.weight").dim(0);
    c.gru_hidden = need("gru.w_hidden").dim(1);
    c.gat_head_dim = need("gat1.head0.weight").dim(0);
    c.dec_hidden = need("dec.layer1.w_hidden").dim(1);
    ModelParams p = init(v, 0, c);
    p.visit([&](const std::string& name, Var& var) {
      const Tensor& t = need(name);
      if (t.shape() != var.shape())
        throw ConfigError("checkpoint tensor '" + name + "' has shape " + shape_str(t.shape()) + ", expected " +
                          shape_str(var.shape()));
      var = leaf(t);
    });
    return p;
  }
};

// ---------------------------------------------------------------------------
// Batched forward. Samples are stacked node-wise; node n of sample b becomes
// row offset[b] + n, and edge sets are shifted accordingly.

struct Batch {
  std::vector<const Sample*> samples;
  std::vector<std::size_t> node_offset;
  std::size_t num_nodes = 0;
  EdgeSet edges;
  std::vector<std::size_t> target_rows;  // global node row per predicted trajectory
  std::vector<const Future*> truths;     // parallel to target_rows

  explicit Batch(std::span<const Sample* const> ss) : samples(ss.begin(), ss.end()) {
    if (samples.empty()) throw ContractError("empty batch");
    for (const Sample* s : samples) {
      if (s->histories.empty()) throw ContractError("sample without vehicles");
      if (s->edges.num_nodes != s->histories.size())
        throw GraphError("edge set node count differs from vehicle count");
      node_offset.push_back(num_nodes);
      for (const auto& e : s->edges.edges) {
        if (e.dst >= s->histories.size() || e.src >= s->histories.size())
          throw GraphError("edge references a node outside the sample");
        edges.edges.push_back({e.dst + num_nodes, e.src + num_nodes});
      }
      for (std::size_t k = 0; k < s->target_nodes.size(); ++k) {
        if (s->target_nodes[k] >= s->histories.size()) throw ContractError("target node outside the sample");
        target_rows.push_back(num_nodes + s->target_nodes[k]);
        truths.push_back(&s->futures.at(k));
      }
      num_nodes += s->histories.size();
    }
    edges.num_nodes = num_nodes;
  }
};

// R_t: shared embedding + GRU over every vehicle's history -> [M×H].
inline Var encode_history(Tape& tape, const ModelParams& p, const Batch& b) {
  const std::size_t M = b.num_nodes;
  Tensor x({kHistoryLen * M, 2});
  const double inv_x = 1.0 / p.lateral_scale, inv_y = 1.0 / p.longitudinal_scale;
  for (std::size_t si = 0; si < b.samples.size(); ++si) {
    const auto& hs = b.samples[si]->histories;
    for (std::size_t n = 0; n < hs.size(); ++n)
      for (std::size_t t = 0; t < kHistoryLen; ++t) {
        const std::size_t row = t * M + b.node_offset[si] + n;
        x.at(row, 0) = hs[n][t].x * inv_x;
        x.at(row, 1) = hs[n][t].y * inv_y;
      }
  }
  Var emb = linear(tape, p.emb, tape.constant(std::move(x)));
  return gru_encode_rows(tape, p.gru, emb, kHistoryLen);
}

// G_t = gat2(leaky_relu(gat1(R_t, E_t)), E_t) -> [M×3·d_head].
inline Var encode_interaction(Tape& tape, const ModelParams& p, const Var& r, const EdgeSet& edges) {
  Var g1 = gat_layer(tape, p.gat1, r, edges, /*activate=*/true);
  return gat_layer(tape, p.gat2, g1, edges, /*activate=*/false);
}

// Decoder context per variant, then the 2-layer LSTM and shared output
// head. Returns kFutureLen tensors of [T×2] positions in meters.
inline std::vector<Var> decode_future(Tape& tape, const ModelParams& p, const Var& g, const Var& r) {
  Var ctx;
  switch (p.variant) {
    case Variant::kDynamicsOnly: ctx = r; break;
    case Variant::kInteractionOnly: ctx = g; break;
    default: ctx = concat_last_dim(tape, {g, r}); break;
  }
  if (ctx.value().rank() != 2 || ctx.value().dim(1) != p.context_dim())
    throw ContractError("decode_future: context " + shape_str(ctx.shape()) + " does not match variant " +
                        variant_name(p.variant));
  std::vector<Var> out;
  out.reserve(kFutureLen);
  const Var unit = tape.constant(Tensor::vector({p.lateral_scale, p.longitudinal_scale}));
  for (const Var& h : lstm_decode_batch(tape, p.dec, ctx, kFutureLen))
    out.push_back(mul(tape, linear(tape, p.head, h), unit));
  return out;
}

// Full forward for every target in the batch.
inline std::vector<Var> forward(Tape& tape, const ModelParams& p, const Batch& b) {
  Var r = encode_history(tape, p, b);
  Var r_t = gather_rows(tape, r, b.target_rows);
  Var g_t;
  if (p.variant != Variant::kDynamicsOnly) g_t = gather_rows(tape, encode_interaction(tape, p, r, b.edges), b.target_rows);
  return decode_future(tape, p, g_t, r_t);
}

using Prediction = Future;

inline std::vector<Prediction> predictions_from(const std::vector<Var>& steps) {
  const std::size_t T = steps.at(0).value().dim(0);
  std::vector<Prediction> out(T);
  for (std::size_t k = 0; k < steps.size(); ++k)
    for (std::size_t i = 0; i < T; ++i) out[i][k] = {steps[k].value().at(i, 0), steps[k].value().at(i, 1)};
  return out;
}

inline Prediction forward_stp(const ModelParams& p, const Sample& s) {
  if (!s.is_stp()) throw ContractError("forward_stp: sample is not an STP record");
  const Sample* ptr = &s;
  Tape tape(false);
  return predictions_from(forward(tape, p, Batch({&ptr, 1}))).at(0);
}

// One shared encoding pass; one trajectory per target node 1..m.
inline std::vector<Prediction> forward_mtp(const ModelParams& p, const Sample& s) {
  const Sample* ptr = &s;
  Tape tape(false);
  return predictions_from(forward(tape, p, Batch({&ptr, 1})));
}

// Inference over many samples, `batch` at a time; one prediction per
// target in sample order.
inline std::vector<Prediction> predict_all(const ModelParams& p, const std::vector<Sample>& samples,
                                           std::size_t batch = 256) {
  std::vector<Prediction> out;
  std::vector<const Sample*> ptrs;
  for (std::size_t i = 0; i < samples.size(); i += batch) {
    ptrs.clear();
    for (std::size_t j = i; j < std::min(samples.size(), i + batch); ++j) ptrs.push_back(&samples[j]);
    Tape tape(false);
    auto preds = predictions_from(forward(tape, p, Batch(ptrs)));
    out.insert(out.end(), preds.begin(), preds.end());
  }
  return out;
}

}  // namespace sgtraj
