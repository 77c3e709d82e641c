#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace pafnucy {

// Dense row-major tensor. Deliberately minimal: shape plus a flat value
// buffer; all layer arithmetic lives in ops.hpp.
template <class T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> values;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    values.assign(numel_of(shape), T(0));
  }

  static size_t numel_of(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
  }

  size_t numel() const { return values.size(); }

  T& operator[](size_t i) { return values[i]; }
  const T& operator[](size_t i) const { return values[i]; }

  T* data() { return values.data(); }
  const T* data() const { return values.data(); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.values.reserve(values.size());
    for (const T& v : values) out.values.push_back(static_cast<U>(v));
    return out;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Debug-build guard for the all-finite invariant.
template <class T>
inline void debug_check_finite(const Tensor<T>& t) {
#ifndef NDEBUG
  for (const T& v : t.values) assert(std::isfinite(static_cast<double>(v)));
#else
  (void)t;
#endif
}

}  // namespace pafnucy
