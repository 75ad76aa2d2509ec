#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "ltnvae/common.hpp"

namespace ltnvae {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// Dense row-major tensor. Plain value type: the autodiff graph, the model
// parameters and all op inputs/outputs are carried by this.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), T(0)) {
    check_shape();
  }
  Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    check_shape();
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape))
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(T v) { return Tensor({1}, {v}); }
  static Tensor vector(std::vector<T> v) {
    auto n = static_cast<std::int64_t>(v.size());
    return Tensor({n}, std::move(v));
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  bool is_scalar() const { return numel() == 1; }
  std::int64_t rows() const { return shape.empty() ? 1 : shape.front(); }
  std::int64_t row_size() const { return shape.empty() ? 1 : numel() / shape.front(); }

  T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  T& at2(std::int64_t r, std::int64_t c) { return data[r * shape[1] + c]; }
  const T& at2(std::int64_t r, std::int64_t c) const { return data[r * shape[1] + c]; }

  bool all_finite() const {
    for (const T& v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

 private:
  void check_shape() const {
    for (auto d : shape)
      if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
  }
};

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

}  // namespace ltnvae
