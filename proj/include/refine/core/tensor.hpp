#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

#include "refine/core/errors.hpp"

namespace refine {

// Dense NCHW float tensor. The only data carrier used by the nn stack.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  std::size_t size() const { return v.size(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }

  float& at(int in, int ic, int iy, int ix) {
    return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  float at(int in, int ic, int iy, int ix) const {
    return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  float* sample(int in) { return v.data() + in * sample_size(); }
  const float* sample(int in) const { return v.data() + in * sample_size(); }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void fill(float x) { std::fill(v.begin(), v.end(), x); }

  Tensor& operator+=(const Tensor& o) {
    assert(same_shape(o));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    return *this;
  }

  Tensor& scale(float s) {
    for (auto& x : v) x *= s;
    return *this;
  }
};

// Row-major matrix used for probability/feature batches.
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<float> v;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0f) {}

  float& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  float at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

  float* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
  const float* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
};

}  // namespace refine
