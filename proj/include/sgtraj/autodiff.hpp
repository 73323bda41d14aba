#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgtraj/errors.hpp"
#include "sgtraj/tensor.hpp"

namespace sgtraj {

namespace detail {

struct Node {
  Tensor value;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.numel(), 0.0);
    return grad;
  }
};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline ConstMatMap as_mat(const std::vector<double>& v, std::size_t r, std::size_t c) {
  return ConstMatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
inline MatMap as_mat(std::vector<double>& v, std::size_t r, std::size_t c) {
  return MatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

}  // namespace detail

// Handle to a value that may participate in differentiation. Copies share
// the same node, so a parameter leaf can be referenced from many tapes.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  // Accumulated gradient; zeros when nothing has been propagated yet.
  Tensor grad() const {
    if (node_->grad.empty()) return Tensor(node_->value.shape(), 0.0);
    return Tensor(node_->value.shape(), node_->grad);
  }
  std::vector<double>& grad_buffer() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& shared() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Trainable leaf living outside any tape.
inline Var leaf(Tensor value, bool requires_grad = true) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

// Ordered record of operations. Entries are appended as they execute, so
// the list is already in topological order and backward walks it in reverse.
// A tape created with recording disabled evaluates values only.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return rules_.size(); }

  Var constant(Tensor value) {
    auto n = std::make_shared<detail::Node>();
    n->value = std::move(value);
    return Var(std::move(n));
  }

  // Produces an output node. The backward rule receives the output node and
  // must add into the grads of the inputs that require them.
  template <class Rule>
  Var record(Tensor value, bool requires_grad, Rule&& rule) {
    auto n = std::make_shared<detail::Node>();
    n->value = std::move(value);
    n->requires_grad = recording_ && requires_grad;
    if (n->requires_grad) {
      outputs_.push_back(n);
      rules_.emplace_back(std::forward<Rule>(rule));
    }
    return Var(std::move(n));
  }

  // Seeds d(loss)/d(loss) = 1 and propagates. Leaf grads accumulate across
  // calls; intermediate grads are reset first so repeated calls add the same
  // contribution each time.
  void backward(const Var& loss) {
    if (loss.value().numel() != 1)
      throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    if (!loss.requires_grad()) return;
    for (auto& n : outputs_) n->grad.assign(n->value.numel(), 0.0);
    loss.node()->grad_buffer()[0] += 1.0;
    for (std::size_t i = rules_.size(); i-- > 0;) rules_[i](*outputs_[i]);
  }

 private:
  bool recording_;
  std::vector<std::shared_ptr<detail::Node>> outputs_;
  std::vector<std::function<void(detail::Node&)>> rules_;
};

namespace detail {

inline bool needs(const Var& v) { return v.requires_grad(); }

inline void add_into(Var& v, std::span<const double> g) {
  auto& buf = v.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

enum class Broadcast { kSame, kRowVector };

inline Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  const bool row_vec = b.numel() == a.cols() && a.rank() >= 1 &&
                       (b.rank() == 1 || (b.rank() == 2 && b.dim(0) == 1));
  if (row_vec) return Broadcast::kRowVector;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()));
}

template <class F, class DF>
Var unary(Tape& tape, const Var& x, F f, DF df) {
  Tensor out(x.shape());
  const auto& xv = x.value().storage();
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  Var xin = x;
  return tape.record(std::move(out), needs(x), [xin, df](Node& o) mutable {
    auto& g = xin.grad_buffer();
    const auto& xv = xin.value().storage();
    for (std::size_t i = 0; i < xv.size(); ++i) g[i] += o.grad[i] * df(xv[i], o.value[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(Tape& tape, const Var& a, const Var& b) {
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(A.shape()) + " and " +
                     shape_str(B.shape()));
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out(Shape{m, n});
  detail::as_mat(out.storage(), m, n).noalias() =
      detail::as_mat(A.storage(), m, k) * detail::as_mat(B.storage(), k, n);
  Var ain = a, bin = b;
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [ain, bin, m, k, n](detail::Node& o) mutable {
                       auto dC = detail::as_mat(o.grad, m, n);
                       if (ain.requires_grad())
                         detail::as_mat(ain.grad_buffer(), m, k).noalias() +=
                             dC * detail::as_mat(bin.value().storage(), k, n).transpose();
                       if (bin.requires_grad())
                         detail::as_mat(bin.grad_buffer(), k, n).noalias() +=
                             detail::as_mat(ain.value().storage(), m, k).transpose() * dC;
                     });
}

inline Var transpose(Tape& tape, const Var& a) {
  const auto& A = a.value();
  if (A.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(A.shape()));
  const std::size_t m = A.dim(0), n = A.dim(1);
  Tensor out(Shape{n, m});
  detail::as_mat(out.storage(), n, m) = detail::as_mat(A.storage(), m, n).transpose();
  Var ain = a;
  return tape.record(std::move(out), a.requires_grad(), [ain, m, n](detail::Node& o) mutable {
    detail::as_mat(ain.grad_buffer(), m, n) += detail::as_mat(o.grad, n, m).transpose();
  });
}

// x·Wᵀ + b over the last dimension of x. W is [out×in], b is [out].
inline Var affine(Tape& tape, const Var& x, const Var& w, const Var& b) {
  const auto& X = x.value();
  const auto& W = w.value();
  const auto& B = b.value();
  if (W.rank() != 2 || X.cols() != W.dim(1) || B.numel() != W.dim(0))
    throw ShapeError("affine: input " + shape_str(X.shape()) + " weight " + shape_str(W.shape()) +
                     " bias " + shape_str(B.shape()));
  const std::size_t m = X.rows(), k = W.dim(1), n = W.dim(0);
  Shape os = X.shape();
  if (os.empty()) os = {1};
  os.back() = n;
  Tensor out(os);
  auto O = detail::as_mat(out.storage(), m, n);
  O.noalias() = detail::as_mat(X.storage(), m, k) * detail::as_mat(W.storage(), n, k).transpose();
  O.rowwise() += detail::as_mat(B.storage(), 1, n).row(0);
  Var xin = x, win = w, bin = b;
  return tape.record(std::move(out), x.requires_grad() || w.requires_grad() || b.requires_grad(),
                     [xin, win, bin, m, k, n](detail::Node& o) mutable {
                       auto dO = detail::as_mat(o.grad, m, n);
                       if (xin.requires_grad())
                         detail::as_mat(xin.grad_buffer(), m, k).noalias() +=
                             dO * detail::as_mat(win.value().storage(), n, k);
                       if (win.requires_grad())
                         detail::as_mat(win.grad_buffer(), n, k).noalias() +=
                             dO.transpose() * detail::as_mat(xin.value().storage(), m, k);
                       if (bin.requires_grad())
                         detail::as_mat(bin.grad_buffer(), 1, n) += dO.colwise().sum();
                     });
}

// ---------------------------------------------------------------------------
// Elementwise

namespace detail {

template <class F, class DA, class DB>
Var binary(Tape& tape, const Var& a, const Var& b, const char* name, F f, DA da, DB db) {
  const auto kind = broadcast_kind(a.value(), b.value(), name);
  const auto& A = a.value().storage();
  const auto& B = b.value().storage();
  const std::size_t cols = kind == Broadcast::kSame ? A.size() : a.value().cols();
  Tensor out(a.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = f(A[i], B[i % cols]);
  Var ain = a, bin = b;
  return tape.record(std::move(out), needs(a) || needs(b), [ain, bin, cols, da, db](Node& o) mutable {
    const auto& A = ain.value().storage();
    const auto& B = bin.value().storage();
    if (ain.requires_grad()) {
      auto& g = ain.grad_buffer();
      for (std::size_t i = 0; i < A.size(); ++i) g[i] += o.grad[i] * da(A[i], B[i % cols]);
    }
    if (bin.requires_grad()) {
      auto& g = bin.grad_buffer();
      for (std::size_t i = 0; i < A.size(); ++i) g[i % cols] += o.grad[i] * db(A[i], B[i % cols]);
    }
  });
}

}  // namespace detail

// b may equal a's shape or be a row vector matching a's last dimension.
inline Var add(Tape& tape, const Var& a, const Var& b) {
  return detail::binary(
      tape, a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Var sub(Tape& tape, const Var& a, const Var& b) {
  return detail::binary(
      tape, a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Var mul(Tape& tape, const Var& a, const Var& b) {
  return detail::binary(
      tape, a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Var scale(Tape& tape, const Var& x, double c) {
  return detail::unary(
      tape, x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

// 1 - x, used by GRU interpolation.
inline Var one_minus(Tape& tape, const Var& x) {
  return detail::unary(
      tape, x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

inline Var square(Tape& tape, const Var& x) {
  return detail::unary(
      tape, x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Var tanh(Tape& tape, const Var& x) {
  return detail::unary(
      tape, x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline double sigmoid_value(double v) {
  return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

inline Var sigmoid(Tape& tape, const Var& x) {
  return detail::unary(
      tape, x, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

// Subgradient at 0 is 1.
inline Var leaky_relu(Tape& tape, const Var& x, double slope = 0.1) {
  return detail::unary(
      tape, x, [slope](double v) { return v >= 0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0 ? 1.0 : slope; });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping

inline Var sum(Tape& tape, const Var& x) {
  double s = 0;
  for (double v : x.value().storage()) s += v;
  Var xin = x;
  return tape.record(Tensor::scalar(s), x.requires_grad(), [xin](detail::Node& o) mutable {
    for (double& g : xin.grad_buffer()) g += o.grad[0];
  });
}

inline Var mean(Tape& tape, const Var& x) {
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.value().numel()));
}

inline Var reshape(Tape& tape, const Var& x, Shape s) {
  Tensor out = x.value().reshaped(std::move(s));
  Var xin = x;
  return tape.record(std::move(out), x.requires_grad(), [xin](detail::Node& o) mutable {
    detail::add_into(xin, o.grad);
  });
}

// Concatenate along the last dimension; all leading dimensions must agree.
inline Var concat_last_dim(Tape& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_last_dim: no operands");
  const Shape& s0 = parts[0].shape();
  const std::size_t rows = parts[0].value().rows();
  std::size_t total = 0;
  bool rg = false;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    const bool lead_ok = s.size() == s0.size() && std::equal(s.begin(), s.end() - (s.empty() ? 0 : 1),
                                                             s0.begin());
    if (!lead_ok || s.empty())
      throw ShapeError("concat_last_dim: incompatible shapes " + shape_str(s0) + " and " + shape_str(s));
    total += p.value().cols();
    rg = rg || p.requires_grad();
  }
  Shape os = s0;
  os.back() = total;
  Tensor out(os);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.value().cols();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) out[r * total + off + j] = p.value()[r * c + j];
    off += c;
  }
  std::vector<Var> ins = parts;
  return tape.record(std::move(out), rg, [ins, rows, total](detail::Node& o) mutable {
    std::size_t off = 0;
    for (auto& p : ins) {
      const std::size_t c = p.value().cols();
      if (p.requires_grad()) {
        auto& g = p.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < c; ++j) g[r * c + j] += o.grad[r * total + off + j];
      }
      off += c;
    }
  });
}

// Columns [begin, end) of the last dimension.
inline Var slice_last_dim(Tape& tape, const Var& x, std::size_t begin, std::size_t end) {
  const std::size_t cols = x.value().cols(), rows = x.value().rows();
  if (begin >= end || end > cols)
    throw ShapeError("slice_last_dim: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + shape_str(x.shape()));
  const std::size_t w = end - begin;
  Shape os = x.shape();
  os.back() = w;
  Tensor out(os);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = x.value()[r * cols + begin + j];
  Var xin = x;
  return tape.record(std::move(out), x.requires_grad(), [xin, rows, cols, begin, w](detail::Node& o) mutable {
    auto& g = xin.grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < w; ++j) g[r * cols + begin + j] += o.grad[r * w + j];
  });
}

// Rows [begin, end) of a matrix.
inline Var slice_rows(Tape& tape, const Var& x, std::size_t begin, std::size_t end) {
  const auto& X = x.value();
  if (X.rank() != 2 || begin >= end || end > X.dim(0))
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + shape_str(X.shape()));
  const std::size_t c = X.dim(1);
  Tensor out(Shape{end - begin, c},
             std::vector<double>(X.storage().begin() + static_cast<std::ptrdiff_t>(begin * c),
                                 X.storage().begin() + static_cast<std::ptrdiff_t>(end * c)));
  Var xin = x;
  return tape.record(std::move(out), x.requires_grad(), [xin, begin, c](detail::Node& o) mutable {
    auto& g = xin.grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[begin * c + i] += o.grad[i];
  });
}

inline Var concat_rows(Tape& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const std::size_t c = parts[0].value().cols();
  std::size_t rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.value().rank() != 2 || p.value().cols() != c)
      throw ShapeError("concat_rows: incompatible shapes " + shape_str(parts[0].shape()) + " and " +
                       shape_str(p.shape()));
    rows += p.value().dim(0);
    rg = rg || p.requires_grad();
  }
  std::vector<double> data;
  data.reserve(rows * c);
  for (const auto& p : parts) data.insert(data.end(), p.value().storage().begin(), p.value().storage().end());
  std::vector<Var> ins = parts;
  return tape.record(Tensor(Shape{rows, c}, std::move(data)), rg, [ins](detail::Node& o) mutable {
    std::size_t off = 0;
    for (auto& p : ins) {
      const std::size_t n = p.value().numel();
      if (p.requires_grad()) detail::add_into(p, std::span<const double>(o.grad).subspan(off, n));
      off += n;
    }
  });
}

// out[i] = x[index[i]] along the first dimension (rows of a matrix, entries
// of a vector).
inline Var gather_rows(Tape& tape, const Var& x, std::span<const std::size_t> index) {
  const auto& X = x.value();
  if (X.rank() < 1 || X.rank() > 2) throw ShapeError("gather_rows: rank must be 1 or 2");
  if (index.empty()) throw ShapeError("gather_rows: empty index");
  const std::size_t n = X.dim(0);
  const std::size_t c = X.rank() == 2 ? X.dim(1) : 1;
  for (std::size_t i : index)
    if (i >= n) throw GraphError("gather_rows: index " + std::to_string(i) + " >= " + std::to_string(n));
  Shape os = X.shape();
  os[0] = index.size();
  Tensor out(os);
  for (std::size_t r = 0; r < index.size(); ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = X[index[r] * c + j];
  std::vector<std::size_t> idx(index.begin(), index.end());
  Var xin = x;
  return tape.record(std::move(out), x.requires_grad(), [xin, idx, c](detail::Node& o) mutable {
    auto& g = xin.grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) g[idx[r] * c + j] += o.grad[r * c + j];
  });
}

// out[index[i]] += x[i]; out has `count` rows.
inline Var scatter_add_rows(Tape& tape, const Var& x, std::span<const std::size_t> index,
                            std::size_t count) {
  const auto& X = x.value();
  if (X.rank() < 1 || X.rank() > 2 || X.dim(0) != index.size())
    throw ShapeError("scatter_add_rows: " + shape_str(X.shape()) + " vs " +
                     std::to_string(index.size()) + " indices");
  const std::size_t c = X.rank() == 2 ? X.dim(1) : 1;
  for (std::size_t i : index)
    if (i >= count) throw GraphError("scatter_add_rows: index " + std::to_string(i) + " >= " + std::to_string(count));
  Shape os = X.shape();
  os[0] = count;
  Tensor out(os);
  for (std::size_t r = 0; r < index.size(); ++r)
    for (std::size_t j = 0; j < c; ++j) out[index[r] * c + j] += X[r * c + j];
  std::vector<std::size_t> idx(index.begin(), index.end());
  Var xin = x;
  return tape.record(std::move(out), x.requires_grad(), [xin, idx, c](detail::Node& o) mutable {
    auto& g = xin.grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) g[r * c + j] += o.grad[idx[r] * c + j];
  });
}

// Multiply row i of x [E×d] by w[i], w of shape [E].
inline Var scale_rows(Tape& tape, const Var& x, const Var& w) {
  const auto& X = x.value();
  const auto& W = w.value();
  if (X.rank() != 2 || W.numel() != X.dim(0))
    throw ShapeError("scale_rows: " + shape_str(X.shape()) + " by " + shape_str(W.shape()));
  const std::size_t e = X.dim(0), d = X.dim(1);
  Tensor out(X.shape());
  for (std::size_t r = 0; r < e; ++r)
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = X[r * d + j] * W[r];
  Var xin = x, win = w;
  return tape.record(std::move(out), x.requires_grad() || w.requires_grad(),
                     [xin, win, e, d](detail::Node& o) mutable {
                       const auto& X = xin.value();
                       const auto& W = win.value();
                       if (xin.requires_grad()) {
                         auto& g = xin.grad_buffer();
                         for (std::size_t r = 0; r < e; ++r)
                           for (std::size_t j = 0; j < d; ++j) g[r * d + j] += o.grad[r * d + j] * W[r];
                       }
                       if (win.requires_grad()) {
                         auto& g = win.grad_buffer();
                         for (std::size_t r = 0; r < e; ++r)
                           for (std::size_t j = 0; j < d; ++j) g[r] += o.grad[r * d + j] * X[r * d + j];
                       }
                     });
}

// ---------------------------------------------------------------------------
// Segment softmax

// Softmax of scores within each group of equal segment ids. Empty in,
// empty out.
inline std::vector<double> segment_softmax_values(std::span<const double> scores,
                                                  std::span<const std::size_t> segment_of) {
  if (scores.size() != segment_of.size())
    throw ShapeError("segment_softmax: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(segment_of.size()) + " segment ids");
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const std::size_t nseg = *std::max_element(segment_of.begin(), segment_of.end()) + 1;
  std::vector<double> mx(nseg, -std::numeric_limits<double>::infinity()), den(nseg, 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i) mx[segment_of[i]] = std::max(mx[segment_of[i]], scores[i]);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx[segment_of[i]]);
    den[segment_of[i]] += out[i];
  }
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] /= den[segment_of[i]];
  return out;
}

inline Var segment_softmax(Tape& tape, const Var& scores, std::span<const std::size_t> segment_of) {
  if (scores.value().rank() != 1) throw ShapeError("segment_softmax: scores must be rank 1");
  auto vals = segment_softmax_values(scores.value().storage(), segment_of);
  std::vector<std::size_t> seg(segment_of.begin(), segment_of.end());
  const std::size_t nseg = *std::max_element(seg.begin(), seg.end()) + 1;
  Var sin = scores;
  return tape.record(Tensor(scores.shape(), std::move(vals)), scores.requires_grad(),
                     [sin, seg, nseg](detail::Node& o) mutable {
                       // dL/ds_i = y_i (g_i - Σ_{j in seg} g_j y_j)
                       std::vector<double> dot(nseg, 0.0);
                       for (std::size_t i = 0; i < seg.size(); ++i) dot[seg[i]] += o.grad[i] * o.value[i];
                       auto& g = sin.grad_buffer();
                       for (std::size_t i = 0; i < seg.size(); ++i)
                         g[i] += o.value[i] * (o.grad[i] - dot[seg[i]]);
                     });
}

}  // namespace sgtraj
