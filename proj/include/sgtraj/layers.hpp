#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "sgtraj/autodiff.hpp"
#include "sgtraj/graph.hpp"

namespace sgtraj {

inline constexpr double kLeakySlope = 0.1;
inline constexpr std::size_t kGatHeads = 3;

namespace detail {

inline Var init_weight(std::size_t rows, std::size_t cols, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return leaf(Tensor::uniform({rows, cols}, -bound, bound, rng));
}

inline Var zeros_leaf(Shape s) { return leaf(Tensor(std::move(s), 0.0)); }

}  // namespace detail

// y = x·Wᵀ + b
struct LinearParams {
  Var weight;  // [out×in]
  Var bias;    // [out]

  static LinearParams init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    return {detail::init_weight(out, in, in, rng), detail::zeros_leaf({out})};
  }

  std::size_t in_dim() const { return weight.value().dim(1); }
  std::size_t out_dim() const { return weight.value().dim(0); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

inline Var linear(Tape& tape, const LinearParams& p, const Var& x) {
  return affine(tape, x, p.weight, p.bias);
}

// Single-layer GRU. Gate blocks are stacked row-wise in the order
// (update, reset, candidate):
//   z = σ(Wz x + Uz h + bz),  r = σ(Wr x + Ur h + br)
//   n = tanh(Wn x + Un (r ⊙ h) + bn)
//   h' = (1 - z) ⊙ h + z ⊙ n
struct GruParams {
  Var w_input;   // [3H×in]
  Var w_hidden;  // [3H×H]
  Var bias;      // [3H]

  static GruParams init(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
    return {detail::init_weight(3 * hidden, in, in, rng), detail::init_weight(3 * hidden, hidden, hidden, rng),
            detail::zeros_leaf({3 * hidden})};
  }

  std::size_t in_dim() const { return w_input.value().dim(1); }
  std::size_t hidden() const { return w_hidden.value().dim(1); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".w_input", w_input);
    f(prefix + ".w_hidden", w_hidden);
    f(prefix + ".bias", bias);
  }
};

// Runs the GRU over T steps stacked step-major in `seq_rows` ([T·M×in],
// row t·M + i is step t of sequence i) from h0 = 0. Returns the final hidden
// state [M×H].
inline Var gru_encode_rows(Tape& tape, const GruParams& p, const Var& seq_rows, std::size_t T) {
  if (T == 0) throw ContractError("gru_encode: empty sequence");
  const auto& X = seq_rows.value();
  if (X.rank() != 2 || X.dim(1) != p.in_dim() || X.dim(0) % T != 0)
    throw ShapeError("gru_encode: input " + shape_str(X.shape()) + " is not " + std::to_string(T) +
                     " stacked steps of width " + std::to_string(p.in_dim()));
  const std::size_t H = p.hidden();
  const std::size_t M = X.dim(0) / T;
  // Input projections for all steps in one product.
  Var gx_all = affine(tape, seq_rows, p.w_input, p.bias);
  Var u_zr_t = transpose(tape, slice_rows(tape, p.w_hidden, 0, 2 * H));
  Var u_n_t = transpose(tape, slice_rows(tape, p.w_hidden, 2 * H, 3 * H));
  Var h = tape.constant(Tensor({M, H}, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    Var gx = T == 1 ? gx_all : slice_rows(tape, gx_all, t * M, (t + 1) * M);
    Var zr = sigmoid(tape, add(tape, slice_last_dim(tape, gx, 0, 2 * H), matmul(tape, h, u_zr_t)));
    Var z = slice_last_dim(tape, zr, 0, H);
    Var r = slice_last_dim(tape, zr, H, 2 * H);
    Var n = tanh(tape, add(tape, slice_last_dim(tape, gx, 2 * H, 3 * H), matmul(tape, mul(tape, r, h), u_n_t)));
    h = add(tape, mul(tape, one_minus(tape, z), h), mul(tape, z, n));
  }
  return h;
}

// `steps` holds one [M×in] tensor per time step.
inline Var gru_encode_batch(Tape& tape, const GruParams& p, const std::vector<Var>& steps) {
  if (steps.empty()) throw ContractError("gru_encode: empty sequence");
  const std::size_t M = steps[0].value().rows();
  for (const auto& s : steps)
    if (s.value().rank() != 2 || s.value().dim(0) != M || s.value().dim(1) != p.in_dim())
      throw ShapeError("gru_encode: step shape " + shape_str(s.shape()) + ", expected [" + std::to_string(M) +
                       "x" + std::to_string(p.in_dim()) + "]");
  return gru_encode_rows(tape, p, concat_rows(tape, steps), steps.size());
}

// seq [T×in] -> final hidden state [H].
inline Var gru_encode(Tape& tape, const GruParams& p, const Var& seq) {
  if (seq.value().rank() != 2) throw ShapeError("gru_encode: sequence must be [T x in]");
  return reshape(tape, gru_encode_rows(tape, p, seq, seq.value().dim(0)), {p.hidden()});
}

// One LSTM layer; gate blocks stacked as (input, forget, cell, output).
struct LstmLayerParams {
  Var w_input;   // [4H×in]
  Var w_hidden;  // [4H×H]
  Var bias;      // [4H]

  static LstmLayerParams init(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
    return {detail::init_weight(4 * hidden, in, in, rng), detail::init_weight(4 * hidden, hidden, hidden, rng),
            detail::zeros_leaf({4 * hidden})};
  }

  std::size_t in_dim() const { return w_input.value().dim(1); }
  std::size_t hidden() const { return w_hidden.value().dim(1); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".w_input", w_input);
    f(prefix + ".w_hidden", w_hidden);
    f(prefix + ".bias", bias);
  }
};

struct LstmParams {
  LstmLayerParams layer1;
  LstmLayerParams layer2;

  static LstmParams init(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
    auto l1 = LstmLayerParams::init(in, hidden, rng);
    auto l2 = LstmLayerParams::init(hidden, hidden, rng);
    return {std::move(l1), std::move(l2)};
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    layer1.visit(prefix + ".layer1", f);
    layer2.visit(prefix + ".layer2", f);
  }
};

namespace detail {

struct LstmState {
  Var h;
  Var c;
};

// `gx` already holds W x + b for this step.
inline LstmState lstm_cell(Tape& tape, const Var& gx, const Var& w_hidden_t, const LstmState& s, std::size_t H) {
  Var g = add(tape, gx, matmul(tape, s.h, w_hidden_t));
  Var i = sigmoid(tape, slice_last_dim(tape, g, 0, H));
  Var f = sigmoid(tape, slice_last_dim(tape, g, H, 2 * H));
  Var cand = tanh(tape, slice_last_dim(tape, g, 2 * H, 3 * H));
  Var o = sigmoid(tape, slice_last_dim(tape, g, 3 * H, 4 * H));
  Var c = add(tape, mul(tape, f, s.c), mul(tape, i, cand));
  return {mul(tape, o, tanh(tape, c)), c};
}

}  // namespace detail

// Two-layer LSTM fed the same input [M×ctx] at every step, zero initial
// state. Returns the top-layer hidden state per step, each [M×H].
inline std::vector<Var> lstm_decode_batch(Tape& tape, const LstmParams& p, const Var& step_input, std::size_t steps) {
  if (steps < 1) throw ContractError("lstm_decode: steps must be >= 1");
  const auto& x = step_input.value();
  if (x.rank() != 2 || x.dim(1) != p.layer1.in_dim())
    throw ShapeError("lstm_decode: input " + shape_str(x.shape()) + ", expected [M x " +
                     std::to_string(p.layer1.in_dim()) + "]");
  const std::size_t M = x.dim(0), H = p.layer1.hidden();
  Var gx1 = affine(tape, step_input, p.layer1.w_input, p.layer1.bias);
  Var u1 = transpose(tape, p.layer1.w_hidden);
  Var u2 = transpose(tape, p.layer2.w_hidden);
  Var zero = tape.constant(Tensor({M, H}, 0.0));
  detail::LstmState s1{zero, zero}, s2{zero, zero};
  std::vector<Var> out;
  out.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    s1 = detail::lstm_cell(tape, gx1, u1, s1, H);
    Var gx2 = affine(tape, s1.h, p.layer2.w_input, p.layer2.bias);
    s2 = detail::lstm_cell(tape, gx2, u2, s2, H);
    out.push_back(s2.h);
  }
  return out;
}

// step_input [ctx] -> [steps×H].
inline Var lstm_decode(Tape& tape, const LstmParams& p, const Var& step_input, std::size_t steps) {
  const std::size_t ctx = step_input.value().numel();
  return concat_rows(tape, lstm_decode_batch(tape, p, reshape(tape, step_input, {1, ctx}), steps));
}

struct GatHead {
  Var weight;     // [d_head×d_in]
  Var attention;  // [2·d_head]: first half scores the destination, second the source
};

struct GatLayerParams {
  std::vector<GatHead> heads;

  static GatLayerParams init(std::size_t in, std::size_t head_dim, std::mt19937_64& rng) {
    GatLayerParams p;
    for (std::size_t h = 0; h < kGatHeads; ++h) {
      Var w = detail::init_weight(head_dim, in, in, rng);
      const double bound = 1.0 / std::sqrt(static_cast<double>(2 * head_dim));
      Var a = leaf(Tensor::uniform({2 * head_dim}, -bound, bound, rng));
      p.heads.push_back({w, a});
    }
    return p;
  }

  std::size_t in_dim() const { return heads.at(0).weight.value().dim(1); }
  std::size_t head_dim() const { return heads.at(0).weight.value().dim(0); }
  std::size_t out_dim() const { return heads.size() * head_dim(); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t h = 0; h < heads.size(); ++h) {
      f(prefix + ".head" + std::to_string(h) + ".weight", heads[h].weight);
      f(prefix + ".head" + std::to_string(h) + ".attention", heads[h].attention);
    }
  }
};

// Multi-head graph attention over incoming edges. For each head:
//   z_i = W x_i,  s(e^{i,j}) = leaky_relu(aᵀ[z_i ‖ z_j]),
//   α = softmax of s over the edges into i,  out_i = Σ_j α_ij z_j.
// Heads are concatenated; `activate` applies leaky_relu to the result.
inline Var gat_layer(Tape& tape, const GatLayerParams& p, const Var& feats, const EdgeSet& edges,
                     bool activate = true) {
  if (p.heads.size() != kGatHeads) throw ContractError("gat_layer: expected 3 heads");
  const auto& X = feats.value();
  if (X.rank() != 2 || X.dim(1) != p.in_dim())
    throw ShapeError("gat_layer: features " + shape_str(X.shape()) + ", expected [N x " +
                     std::to_string(p.in_dim()) + "]");
  const std::size_t N = X.dim(0);
  if (edges.num_nodes != N)
    throw GraphError("gat_layer: edge set for " + std::to_string(edges.num_nodes) + " nodes, features for " +
                     std::to_string(N));
  std::vector<bool> has_in(N, false);
  for (const auto& e : edges.edges) {
    if (e.dst >= N || e.src >= N)
      throw GraphError("gat_layer: edge (" + std::to_string(e.dst) + "," + std::to_string(e.src) +
                       ") out of range for " + std::to_string(N) + " nodes");
    has_in[e.dst] = true;
  }
  for (std::size_t i = 0; i < N; ++i)
    if (!has_in[i]) throw ContractError("gat_layer: node " + std::to_string(i) + " has no incoming edge");

  const auto dst = edges.dst_indices();
  const auto src = edges.src_indices();
  const std::size_t dh = p.head_dim();
  std::vector<Var> outs;
  outs.reserve(p.heads.size());
  for (const auto& head : p.heads) {
    Var z = matmul(tape, feats, transpose(tape, head.weight));
    Var a_dst = reshape(tape, slice_last_dim(tape, head.attention, 0, dh), {dh, 1});
    Var a_src = reshape(tape, slice_last_dim(tape, head.attention, dh, 2 * dh), {dh, 1});
    Var s_dst = reshape(tape, matmul(tape, z, a_dst), {N});
    Var s_src = reshape(tape, matmul(tape, z, a_src), {N});
    Var score = leaky_relu(tape, add(tape, gather_rows(tape, s_dst, dst), gather_rows(tape, s_src, src)),
                           kLeakySlope);
    Var alpha = segment_softmax(tape, score, dst);
    Var msg = scale_rows(tape, gather_rows(tape, z, src), alpha);
    outs.push_back(scatter_add_rows(tape, msg, dst, N));
  }
  Var out = concat_last_dim(tape, outs);
  return activate ? leaky_relu(tape, out, kLeakySlope) : out;
}

}  // namespace sgtraj
