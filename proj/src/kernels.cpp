#include "salmask/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace salmask::kernels {

namespace {
bool g_parallel = true;
}

void set_parallel(bool on) { g_parallel = on; }
bool parallel_enabled() { return g_parallel; }

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// The parallel loops below split work across independent output elements and
// keep the per-element accumulation order identical to the ref:: versions, so
// optimized and reference results are bit-identical. Small spatial sizes go
// through a patch-matrix (im2col) path whose inner loops run over the long
// contiguous (ci,ky,kx) axis; the accumulation order per output element is
// unchanged.

namespace {

constexpr int kDirectMinSide = 32;

// rows = pixels, cols = (ci,ky,kx); zero padding materialized. Used by the
// weight-gradient kernel, which vectorizes across the k columns.
void build_patch_rows(const Tensor& in, int n, std::vector<Real>& pt) {
  const int Ci = in.c, H = in.h, W = in.w;
  const int K = Ci * 9;
  pt.assign(static_cast<size_t>(H) * W * K, 0.0);
  for (int ci = 0; ci < Ci; ++ci) {
    const Real* ip = in.ptr(n, ci);
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const int col = ci * 9 + ky * 3 + kx;
        for (int y = 0; y < H; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= H) continue;
          Real* prow = pt.data() + (static_cast<size_t>(y) * W) * K + col;
          const Real* irow = ip + static_cast<int64_t>(sy) * W + (kx - 1);
          const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
          for (int x = x0; x < x1; ++x) prow[static_cast<size_t>(x) * K] = irow[x];
        }
      }
  }
}

// rows = (ci,ky,kx), cols = pixels. The forward/data-gradient kernels stream
// rows in k order and vectorize across the independent pixel outputs, which
// keeps the per-output accumulation order identical to ref::.
void build_patch_cols(const Tensor& in, int n, std::vector<Real>& pt) {
  const int Ci = in.c, H = in.h, W = in.w;
  const int P = H * W;
  pt.assign(static_cast<size_t>(Ci) * 9 * P, 0.0);
  for (int ci = 0; ci < Ci; ++ci) {
    const Real* ip = in.ptr(n, ci);
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        Real* krow = pt.data() + static_cast<size_t>(ci * 9 + ky * 3 + kx) * P;
        for (int y = 0; y < H; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= H) continue;
          const Real* irow = ip + static_cast<int64_t>(sy) * W + (kx - 1);
          const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
          Real* orow = krow + static_cast<size_t>(y) * W;
          for (int x = x0; x < x1; ++x) orow[x] = irow[x];
        }
      }
  }
}

}  // namespace

void conv3x3_forward(const Tensor& in, const Tensor& w, const std::vector<Real>& bias,
                     Tensor& out) {
  const int N = in.n, Ci = in.c, H = in.h, W = in.w, Co = w.n;
  assert(w.c == Ci && w.h == 3 && w.w == 3);
  assert(out.n == N && out.c == Co && out.h == H && out.w == W);
  if (W >= kDirectMinSide) {
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
    for (int n = 0; n < N; ++n) {
      for (int co = 0; co < Co; ++co) {
        Real* op = out.ptr(n, co);
        const Real b = bias[co];
        for (int i = 0; i < H * W; ++i) op[i] = b;
        for (int ci = 0; ci < Ci; ++ci) {
          const Real* ip = in.ptr(n, ci);
          const Real* wp = w.ptr(co, ci);
          for (int ky = 0; ky < 3; ++ky) {
            const int y0 = std::max(0, 1 - ky), y1 = std::min(H, H + 1 - ky);
            for (int y = y0; y < y1; ++y) {
              Real* orow = op + static_cast<int64_t>(y) * W;
              const Real* irow = ip + static_cast<int64_t>(y + ky - 1) * W;
              for (int kx = 0; kx < 3; ++kx) {
                const Real wv = wp[ky * 3 + kx];
                const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
                const Real* ir = irow + (kx - 1);
                for (int x = x0; x < x1; ++x) orow[x] += wv * ir[x];
              }
            }
          }
        }
      }
    }
    return;
  }
  const int K = Ci * 9, P = H * W;
  std::vector<Real> pt;
  for (int n = 0; n < N; ++n) {
    build_patch_cols(in, n, pt);
#pragma omp parallel for schedule(static) if (g_parallel)
    for (int co = 0; co < Co; ++co) {
      const Real* wp = w.ptr(co, 0);  // Ci*9 contiguous
      Real* op = out.ptr(n, co);
      const Real b = bias[co];
      for (int p = 0; p < P; ++p) op[p] = b;
      for (int k = 0; k < K; ++k) {
        const Real wv = wp[k];
        const Real* krow = pt.data() + static_cast<size_t>(k) * P;
        for (int p = 0; p < P; ++p) op[p] += wv * krow[p];
      }
    }
  }
}

void conv3x3_backward_data(const Tensor& gout, const Tensor& w, Tensor& gin) {
  const int N = gout.n, Co = gout.c, H = gout.h, W = gout.w, Ci = w.c;
  assert(gin.n == N && gin.c == Ci && gin.h == H && gin.w == W);
  if (W >= kDirectMinSide) {
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
    for (int n = 0; n < N; ++n) {
      for (int ci = 0; ci < Ci; ++ci) {
        Real* gp = gin.ptr(n, ci);
        std::memset(gp, 0, sizeof(Real) * H * W);
        for (int co = 0; co < Co; ++co) {
          const Real* gop = gout.ptr(n, co);
          const Real* wp = w.ptr(co, ci);
          // gin[y][x] += w[ky][kx] * gout[y - ky + 1][x - kx + 1]
          for (int ky = 0; ky < 3; ++ky) {
            const int y0 = std::max(0, ky - 1), y1 = std::min(H, H + ky - 1);
            for (int y = y0; y < y1; ++y) {
              Real* grow = gp + static_cast<int64_t>(y) * W;
              const Real* gorow = gop + static_cast<int64_t>(y - ky + 1) * W;
              for (int kx = 0; kx < 3; ++kx) {
                const Real wv = wp[ky * 3 + kx];
                const int x0 = std::max(0, kx - 1), x1 = std::min(W, W + kx - 1);
                const Real* gr = gorow + (1 - kx);
                for (int x = x0; x < x1; ++x) grow[x] += wv * gr[x];
              }
            }
          }
        }
      }
    }
    return;
  }
  // patch layout [k][p] of gout at flipped offsets; weights transposed so the
  // k axis runs over (co,ky,kx), matching the ref:: accumulation order
  const int K = Co * 9, P = H * W;
  std::vector<Real> wt(static_cast<size_t>(Ci) * K);
  for (int ci = 0; ci < Ci; ++ci)
    for (int co = 0; co < Co; ++co)
      for (int kk = 0; kk < 9; ++kk)
        wt[static_cast<size_t>(ci) * K + co * 9 + kk] = w.ptr(co, ci)[kk];
  std::vector<Real> pt;
  for (int n = 0; n < N; ++n) {
    pt.assign(static_cast<size_t>(K) * P, 0.0);
    for (int co = 0; co < Co; ++co) {
      const Real* gop = gout.ptr(n, co);
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          Real* krow = pt.data() + static_cast<size_t>(co * 9 + ky * 3 + kx) * P;
          for (int y = 0; y < H; ++y) {
            const int sy = y - ky + 1;
            if (sy < 0 || sy >= H) continue;
            const Real* grow = gop + static_cast<int64_t>(sy) * W + (1 - kx);
            const int x0 = std::max(0, kx - 1), x1 = std::min(W, W + kx - 1);
            Real* orow = krow + static_cast<size_t>(y) * W;
            for (int x = x0; x < x1; ++x) orow[x] = grow[x];
          }
        }
    }
#pragma omp parallel for schedule(static) if (g_parallel)
    for (int ci = 0; ci < Ci; ++ci) {
      const Real* wp = wt.data() + static_cast<size_t>(ci) * K;
      Real* gp = gin.ptr(n, ci);
      std::memset(gp, 0, sizeof(Real) * P);
      for (int k = 0; k < K; ++k) {
        const Real wv = wp[k];
        const Real* krow = pt.data() + static_cast<size_t>(k) * P;
        for (int p = 0; p < P; ++p) gp[p] += wv * krow[p];
      }
    }
  }
}

void conv3x3_backward_weights(const Tensor& gout, const Tensor& in, Tensor& gw,
                              std::vector<Real>& gbias) {
  const int N = gout.n, Co = gout.c, H = gout.h, W = gout.w, Ci = in.c;
  assert(gw.n == Co && gw.c == Ci && gw.h == 3 && gw.w == 3);
  if (W >= kDirectMinSide) {
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
    for (int co = 0; co < Co; ++co) {
      for (int ci = 0; ci < Ci; ++ci) {
        Real* wp = gw.ptr(co, ci);
        for (int k = 0; k < 9; ++k) wp[k] = 0.0;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            Real acc = 0.0;
            for (int n = 0; n < N; ++n) {
              const Real* gop = gout.ptr(n, co);
              const Real* ip = in.ptr(n, ci);
              const int y0 = std::max(0, 1 - ky), y1 = std::min(H, H + 1 - ky);
              for (int y = y0; y < y1; ++y) {
                const Real* gorow = gop + static_cast<int64_t>(y) * W;
                const Real* irow = ip + static_cast<int64_t>(y + ky - 1) * W + (kx - 1);
                const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
                for (int x = x0; x < x1; ++x) acc += gorow[x] * irow[x];
              }
            }
            wp[ky * 3 + kx] = acc;
          }
        }
      }
    }
  } else {
    const int K = Ci * 9, P = H * W;
    gw.zero();
    std::vector<Real> pt;
    for (int n = 0; n < N; ++n) {
      build_patch_rows(in, n, pt);
#pragma omp parallel for schedule(static) if (g_parallel)
      for (int co = 0; co < Co; ++co) {
        const Real* gop = gout.ptr(n, co);
        Real* wp = gw.ptr(co, 0);
        for (int p = 0; p < P; ++p) {
          const Real g = gop[p];
          const Real* prow = pt.data() + static_cast<size_t>(p) * K;
          for (int k = 0; k < K; ++k) wp[k] += g * prow[k];
        }
      }
    }
  }
#pragma omp parallel for schedule(static) if (g_parallel)
  for (int co = 0; co < Co; ++co) {
    Real acc = 0.0;
    for (int n = 0; n < N; ++n) {
      const Real* gop = gout.ptr(n, co);
      for (int i = 0; i < H * W; ++i) acc += gop[i];
    }
    gbias[co] = acc;
  }
}

void avgpool2_forward(const Tensor& in, Tensor& out) {
  const int N = in.n, C = in.c, H = in.h, W = in.w;
  assert(out.h == H / 2 && out.w == W / 2 && out.n == N && out.c == C);
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const Real* ip = in.ptr(n, c);
      Real* op = out.ptr(n, c);
      for (int y = 0; y < H / 2; ++y) {
        const Real* r0 = ip + static_cast<int64_t>(2 * y) * W;
        const Real* r1 = r0 + W;
        Real* orow = op + static_cast<int64_t>(y) * (W / 2);
        for (int x = 0; x < W / 2; ++x)
          orow[x] = 0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
      }
    }
  }
}

void avgpool2_backward(const Tensor& gout, Tensor& gin) {
  const int N = gin.n, C = gin.c, H = gin.h, W = gin.w;
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const Real* gop = gout.ptr(n, c);
      Real* gp = gin.ptr(n, c);
      for (int y = 0; y < H; ++y) {
        const Real* gorow = gop + static_cast<int64_t>(y / 2) * (W / 2);
        Real* grow = gp + static_cast<int64_t>(y) * W;
        for (int x = 0; x < W; ++x) grow[x] = 0.25 * gorow[x / 2];
      }
    }
  }
}

void upsample_nearest_forward(const Tensor& in, int factor, Tensor& out) {
  const int N = in.n, C = in.c, H = in.h, W = in.w;
  assert(out.h == H * factor && out.w == W * factor);
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const Real* ip = in.ptr(n, c);
      Real* op = out.ptr(n, c);
      for (int y = 0; y < H * factor; ++y) {
        const Real* irow = ip + static_cast<int64_t>(y / factor) * W;
        Real* orow = op + static_cast<int64_t>(y) * (W * factor);
        for (int x = 0; x < W * factor; ++x) orow[x] = irow[x / factor];
      }
    }
  }
}

void upsample_nearest_backward(const Tensor& gout, int factor, Tensor& gin) {
  const int N = gin.n, C = gin.c, H = gin.h, W = gin.w;
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const Real* gop = gout.ptr(n, c);
      Real* gp = gin.ptr(n, c);
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          Real acc = 0.0;
          for (int dy = 0; dy < factor; ++dy) {
            const Real* gorow = gop + static_cast<int64_t>(y * factor + dy) * (W * factor);
            for (int dx = 0; dx < factor; ++dx) acc += gorow[x * factor + dx];
          }
          gp[static_cast<int64_t>(y) * W + x] = acc;
        }
      }
    }
  }
}

void group_norm_forward(const Tensor& in, int groups, const std::vector<Real>& gamma,
                        const std::vector<Real>& beta, Real eps, Tensor& out,
                        std::vector<Real>& mean, std::vector<Real>& inv_std) {
  const int N = in.n, C = in.c, H = in.h, W = in.w;
  const int cpg = C / groups;
  const int64_t M = static_cast<int64_t>(cpg) * H * W;
  mean.assign(static_cast<size_t>(N) * groups, 0.0);
  inv_std.assign(static_cast<size_t>(N) * groups, 0.0);
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
  for (int n = 0; n < N; ++n) {
    for (int g = 0; g < groups; ++g) {
      Real s = 0.0;
      for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
        const Real* ip = in.ptr(n, c);
        for (int i = 0; i < H * W; ++i) s += ip[i];
      }
      const Real mu = s / static_cast<Real>(M);
      Real v = 0.0;
      for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
        const Real* ip = in.ptr(n, c);
        for (int i = 0; i < H * W; ++i) {
          const Real d = ip[i] - mu;
          v += d * d;
        }
      }
      const Real istd = 1.0 / std::sqrt(v / static_cast<Real>(M) + eps);
      mean[static_cast<size_t>(n) * groups + g] = mu;
      inv_std[static_cast<size_t>(n) * groups + g] = istd;
      for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
        const Real* ip = in.ptr(n, c);
        Real* op = out.ptr(n, c);
        const Real ga = gamma[c], be = beta[c];
        for (int i = 0; i < H * W; ++i) op[i] = ga * (ip[i] - mu) * istd + be;
      }
    }
  }
}

void group_norm_backward(const Tensor& gout, const Tensor& in, int groups,
                         const std::vector<Real>& gamma, const std::vector<Real>& mean,
                         const std::vector<Real>& inv_std, Tensor& gin,
                         std::vector<Real>* dgamma, std::vector<Real>* dbeta) {
  const int N = in.n, C = in.c, H = in.h, W = in.w;
  const int cpg = C / groups;
  const int64_t M = static_cast<int64_t>(cpg) * H * W;
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
  for (int n = 0; n < N; ++n) {
    for (int g = 0; g < groups; ++g) {
      const Real mu = mean[static_cast<size_t>(n) * groups + g];
      const Real istd = inv_std[static_cast<size_t>(n) * groups + g];
      Real s1 = 0.0, s2 = 0.0;  // sum(g*gamma), sum(g*gamma*xhat)
      for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
        const Real* gp = gout.ptr(n, c);
        const Real* ip = in.ptr(n, c);
        const Real ga = gamma[c];
        for (int i = 0; i < H * W; ++i) {
          const Real gg = gp[i] * ga;
          s1 += gg;
          s2 += gg * (ip[i] - mu) * istd;
        }
      }
      const Real k1 = s1 / static_cast<Real>(M), k2 = s2 / static_cast<Real>(M);
      for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
        const Real* gp = gout.ptr(n, c);
        const Real* ip = in.ptr(n, c);
        Real* op = gin.ptr(n, c);
        const Real ga = gamma[c];
        for (int i = 0; i < H * W; ++i) {
          const Real xhat = (ip[i] - mu) * istd;
          op[i] = istd * (gp[i] * ga - k1 - xhat * k2);
        }
      }
    }
  }
  if (dgamma != nullptr) {
#pragma omp parallel for schedule(static) if (g_parallel)
    for (int c = 0; c < C; ++c) {
      const int g = c / cpg;
      Real sg = 0.0, sb = 0.0;
      for (int n = 0; n < N; ++n) {
        const Real mu = mean[static_cast<size_t>(n) * groups + g];
        const Real istd = inv_std[static_cast<size_t>(n) * groups + g];
        const Real* gp = gout.ptr(n, c);
        const Real* ip = in.ptr(n, c);
        for (int i = 0; i < H * W; ++i) {
          sg += gp[i] * (ip[i] - mu) * istd;
          sb += gp[i];
        }
      }
      (*dgamma)[c] = sg;
      (*dbeta)[c] = sb;
    }
  }
}

void relu_forward(const Tensor& in, Tensor& out) {
  const int64_t sz = in.size();
#pragma omp parallel for schedule(static) if (g_parallel)
  for (int64_t i = 0; i < sz; ++i) out.data[i] = in.data[i] > 0.0 ? in.data[i] : 0.0;
}

void relu_backward(const Tensor& gout, const Tensor& fwd_out, Tensor& gin) {
  const int64_t sz = gout.size();
#pragma omp parallel for schedule(static) if (g_parallel)
  for (int64_t i = 0; i < sz; ++i) gin.data[i] = fwd_out.data[i] > 0.0 ? gout.data[i] : 0.0;
}

void linear_forward(const Tensor& in, const Tensor& w, const std::vector<Real>& bias,
                    Tensor& out) {
  const int N = in.n, C = in.c, K = w.n;
  assert(w.c == C && out.c == K);
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) {
      const Real* ip = in.ptr(n, 0);
      const Real* wp = w.ptr(k, 0);
      Real acc = bias[k];
      for (int c = 0; c < C; ++c) acc += wp[c] * ip[c];
      out.ptr(n, 0)[k] = acc;
    }
  }
}

void linear_backward(const Tensor& gout, const Tensor& in, const Tensor& w, Tensor& gin, Tensor* gw,
                     std::vector<Real>* gbias) {
  const int N = in.n, C = in.c, K = w.n;
#pragma omp parallel for schedule(static) if (g_parallel)
  for (int n = 0; n < N; ++n) {
    const Real* gop = gout.ptr(n, 0);
    Real* gp = gin.ptr(n, 0);
    for (int c = 0; c < C; ++c) {
      Real acc = 0.0;
      for (int k = 0; k < K; ++k) acc += gop[k] * w.ptr(k, 0)[c];
      gp[c] = acc;
    }
  }
  if (gw != nullptr) {
#pragma omp parallel for schedule(static) if (g_parallel)
    for (int k = 0; k < K; ++k) {
      Real* wp = gw->ptr(k, 0);
      Real gb = 0.0;
      for (int c = 0; c < C; ++c) wp[c] = 0.0;
      for (int n = 0; n < N; ++n) {
        const Real g = gout.ptr(n, 0)[k];
        const Real* ip = in.ptr(n, 0);
        for (int c = 0; c < C; ++c) wp[c] += g * ip[c];
        gb += g;
      }
      (*gbias)[k] = gb;
    }
  }
}

void global_avgpool_forward(const Tensor& in, Tensor& out) {
  const int N = in.n, C = in.c;
  const Real inv = 1.0 / static_cast<Real>(in.h * in.w);
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const Real* ip = in.ptr(n, c);
      Real acc = 0.0;
      for (int i = 0; i < in.h * in.w; ++i) acc += ip[i];
      out.ptr(n, 0)[c] = acc * inv;
    }
  }
}

void global_avgpool_backward(const Tensor& gout, int h, int w, Tensor& gin) {
  const int N = gin.n, C = gin.c;
  const Real inv = 1.0 / static_cast<Real>(h * w);
#pragma omp parallel for collapse(2) schedule(static) if (g_parallel)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const Real g = gout.ptr(n, 0)[c] * inv;
      Real* gp = gin.ptr(n, c);
      for (int i = 0; i < h * w; ++i) gp[i] = g;
    }
  }
}

void softmax(const Tensor& logits, Tensor& probs) {
  const int N = logits.n, K = logits.c;
#pragma omp parallel for schedule(static) if (g_parallel)
  for (int n = 0; n < N; ++n) {
    const Real* lp = logits.ptr(n, 0);
    Real* pp = probs.ptr(n, 0);
    Real mx = lp[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, lp[k]);
    Real s = 0.0;
    for (int k = 0; k < K; ++k) {
      pp[k] = std::exp(lp[k] - mx);
      s += pp[k];
    }
    const Real inv = 1.0 / s;
    for (int k = 0; k < K; ++k) pp[k] *= inv;
  }
}

namespace ref {

void conv3x3_forward(const Tensor& in, const Tensor& w, const std::vector<Real>& bias,
                     Tensor& out) {
  const int N = in.n, Ci = in.c, H = in.h, W = in.w, Co = w.n;
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          Real acc = bias[co];
          for (int ci = 0; ci < Ci; ++ci)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int sy = y + ky - 1, sx = x + kx - 1;
                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                acc += w.at(co, ci, ky, kx) * in.at(n, ci, sy, sx);
              }
          out.at(n, co, y, x) = acc;
        }
}

void conv3x3_backward_data(const Tensor& gout, const Tensor& w, Tensor& gin) {
  const int N = gout.n, Co = gout.c, H = gout.h, W = gout.w, Ci = w.c;
  for (int n = 0; n < N; ++n)
    for (int ci = 0; ci < Ci; ++ci)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          Real acc = 0.0;
          for (int co = 0; co < Co; ++co)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int oy = y - ky + 1, ox = x - kx + 1;
                if (oy < 0 || oy >= H || ox < 0 || ox >= W) continue;
                acc += w.at(co, ci, ky, kx) * gout.at(n, co, oy, ox);
              }
          gin.at(n, ci, y, x) = acc;
        }
}

void conv3x3_backward_weights(const Tensor& gout, const Tensor& in, Tensor& gw,
                              std::vector<Real>& gbias) {
  const int N = gout.n, Co = gout.c, H = gout.h, W = gout.w, Ci = in.c;
  gw.zero();
  for (int co = 0; co < Co; ++co)
    for (int ci = 0; ci < Ci; ++ci)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          Real acc = 0.0;
          for (int n = 0; n < N; ++n)
            for (int y = 0; y < H; ++y)
              for (int x = 0; x < W; ++x) {
                const int sy = y + ky - 1, sx = x + kx - 1;
                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                acc += gout.at(n, co, y, x) * in.at(n, ci, sy, sx);
              }
          gw.at(co, ci, ky, kx) = acc;
        }
  for (int co = 0; co < Co; ++co) {
    Real acc = 0.0;
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) acc += gout.at(n, co, y, x);
    gbias[co] = acc;
  }
}

void avgpool2_forward(const Tensor& in, Tensor& out) {
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c)
      for (int y = 0; y < in.h / 2; ++y)
        for (int x = 0; x < in.w / 2; ++x)
          out.at(n, c, y, x) = 0.25 * (in.at(n, c, 2 * y, 2 * x) + in.at(n, c, 2 * y, 2 * x + 1) +
                                       in.at(n, c, 2 * y + 1, 2 * x) +
                                       in.at(n, c, 2 * y + 1, 2 * x + 1));
}

void upsample_nearest_forward(const Tensor& in, int factor, Tensor& out) {
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c)
      for (int y = 0; y < in.h * factor; ++y)
        for (int x = 0; x < in.w * factor; ++x)
          out.at(n, c, y, x) = in.at(n, c, y / factor, x / factor);
}

void group_norm_forward(const Tensor& in, int groups, const std::vector<Real>& gamma,
                        const std::vector<Real>& beta, Real eps, Tensor& out,
                        std::vector<Real>& mean, std::vector<Real>& inv_std) {
  const int N = in.n, C = in.c, H = in.h, W = in.w;
  const int cpg = C / groups;
  const int64_t M = static_cast<int64_t>(cpg) * H * W;
  mean.assign(static_cast<size_t>(N) * groups, 0.0);
  inv_std.assign(static_cast<size_t>(N) * groups, 0.0);
  for (int n = 0; n < N; ++n)
    for (int g = 0; g < groups; ++g) {
      Real s = 0.0;
      for (int c = g * cpg; c < (g + 1) * cpg; ++c)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) s += in.at(n, c, y, x);
      const Real mu = s / static_cast<Real>(M);
      Real v = 0.0;
      for (int c = g * cpg; c < (g + 1) * cpg; ++c)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            const Real d = in.at(n, c, y, x) - mu;
            v += d * d;
          }
      const Real istd = 1.0 / std::sqrt(v / static_cast<Real>(M) + eps);
      mean[static_cast<size_t>(n) * groups + g] = mu;
      inv_std[static_cast<size_t>(n) * groups + g] = istd;
      for (int c = g * cpg; c < (g + 1) * cpg; ++c)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x)
            out.at(n, c, y, x) = gamma[c] * (in.at(n, c, y, x) - mu) * istd + beta[c];
    }
}

}  // namespace ref

}  // namespace salmask::kernels
