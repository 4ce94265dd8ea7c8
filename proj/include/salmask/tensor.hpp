#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace salmask {

using Real = double;

// Dense 4-d array, NCHW layout. Lower-rank data uses leading dims of 1,
// e.g. a single H×W mask is Tensor(1, 1, H, W).
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<Real> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, Real fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

  static Tensor hw(int h, int w, Real fill = 0.0) { return Tensor(1, 1, h, w, fill); }

  int64_t size() const { return static_cast<int64_t>(n) * c * h * w; }
  int64_t plane() const { return static_cast<int64_t>(h) * w; }

  Real* ptr(int in_, int ic) { return data.data() + (static_cast<int64_t>(in_) * c + ic) * plane(); }
  const Real* ptr(int in_, int ic) const {
    return data.data() + (static_cast<int64_t>(in_) * c + ic) * plane();
  }

  Real& at(int in_, int ic, int iy, int ix) { return ptr(in_, ic)[static_cast<int64_t>(iy) * w + ix]; }
  Real at(int in_, int ic, int iy, int ix) const {
    return ptr(in_, ic)[static_cast<int64_t>(iy) * w + ix];
  }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

inline Tensor like(const Tensor& t, Real fill = 0.0) { return Tensor(t.n, t.c, t.h, t.w, fill); }

}  // namespace salmask
