#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sgtraj/errors.hpp"

namespace sgtraj {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

// Dense row-major array of doubles. Extents are all positive; a rank-0
// tensor is a scalar holding one value.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_extents();
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_numel(shape_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  static Tensor vector(std::initializer_list<double> v) {
    return Tensor(Shape{v.size()}, std::vector<double>(v));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<double> data;
    const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols) throw ShapeError("ragged matrix literal");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor(Shape{rows.size(), cols}, std::move(data));
  }

  template <class Rng>
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data_) v = dist(rng);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  // Rows/cols treating the tensor as a matrix over its last dimension.
  std::size_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  std::size_t rows() const { return numel() / cols(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  Tensor reshaped(Shape s) const { return Tensor(std::move(s), data_); }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_extents() const {
    for (std::size_t e : shape_)
      if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<double> data_;
};

}  // namespace sgtraj
