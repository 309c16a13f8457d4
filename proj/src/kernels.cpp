#include "attnet/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace attnet::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

template <typename T>
void conv2d_forward(const T* x, int B, int C, int H, int W,
                    const T* w, int F, int k, const T* bias, int pad,
                    T* y, int Ho, int Wo) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < B; ++b) {
    for (int f = 0; f < F; ++f) {
      const T* wf = w + static_cast<int64_t>(f) * C * k * k;
      for (int oy = 0; oy < Ho; ++oy) {
        T* yrow = y + ((static_cast<int64_t>(b) * F + f) * Ho + oy) * Wo;
        const T bv = bias ? bias[f] : T(0);
        for (int ox = 0; ox < Wo; ++ox) yrow[ox] = bv;
        for (int c = 0; c < C; ++c) {
          const T* xc = x + (static_cast<int64_t>(b) * C + c) * H * W;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy + ky - pad;
            if (iy < 0 || iy >= H) continue;
            const T* xrow = xc + static_cast<int64_t>(iy) * W;
            const T* wrow = wf + (c * k + ky) * k;
            for (int kx = 0; kx < k; ++kx) {
              const T wv = wrow[kx];
              const int shift = kx - pad;  // ix = ox + shift
              const int lo = std::max(0, -shift);
              const int hi = std::min(Wo, W - shift);
              const T* xs = xrow + shift;
              for (int ox = lo; ox < hi; ++ox) yrow[ox] += wv * xs[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const T* gy, int B, int F, int Ho, int Wo,
                           const T* w, int C, int k, int pad,
                           T* gx, int H, int W) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      T* gxc = gx + (static_cast<int64_t>(b) * C + c) * H * W;
      for (int iy = 0; iy < H; ++iy) {
        T* gxrow = gxc + static_cast<int64_t>(iy) * W;
        for (int f = 0; f < F; ++f) {
          const T* wfc = w + (static_cast<int64_t>(f) * C + c) * k * k;
          for (int ky = 0; ky < k; ++ky) {
            const int oy = iy + pad - ky;
            if (oy < 0 || oy >= Ho) continue;
            const T* gyrow = gy + ((static_cast<int64_t>(b) * F + f) * Ho + oy) * Wo;
            for (int kx = 0; kx < k; ++kx) {
              const T wv = wfc[ky * k + kx];
              const int shift = pad - kx;  // ox = ix + shift
              const int lo = std::max(0, -shift);
              const int hi = std::min(W, Wo - shift);
              const T* gys = gyrow + shift;
              for (int ix = lo; ix < hi; ++ix) gxrow[ix] += wv * gys[ix];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_weight(const T* gy, int B, int F, int Ho, int Wo,
                            const T* x, int C, int H, int W, int k, int pad,
                            T* gw) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int f = 0; f < F; ++f) {
    for (int c = 0; c < C; ++c) {
      T* gwfc = gw + (static_cast<int64_t>(f) * C + c) * k * k;
      // Row-vector accumulator instead of a scalar: the inner loop becomes a
      // lane-wise FMA the compiler vectorizes freely, and the horizontal sum
      // happens once per kernel tap rather than once per row. This is the
      // training hot spot.
      std::vector<T> accrow(static_cast<size_t>(Wo));
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const int shift = kx - pad;  // ix = ox + shift
          const int lo = std::max(0, -shift);
          const int hi = std::min(Wo, W - shift);
          std::fill(accrow.begin(), accrow.end(), T(0));
          T* arow = accrow.data();
          for (int b = 0; b < B; ++b) {
            const T* gyf = gy + (static_cast<int64_t>(b) * F + f) * Ho * Wo;
            const T* xc = x + (static_cast<int64_t>(b) * C + c) * H * W;
            for (int oy = 0; oy < Ho; ++oy) {
              const int iy = oy + ky - pad;
              if (iy < 0 || iy >= H) continue;
              const T* gyrow = gyf + static_cast<int64_t>(oy) * Wo;
              const T* xs = xc + static_cast<int64_t>(iy) * W + shift;
              for (int ox = lo; ox < hi; ++ox) arow[ox] += gyrow[ox] * xs[ox];
            }
          }
          T acc = T(0);
          for (int ox = lo; ox < hi; ++ox) acc += arow[ox];
          gwfc[ky * k + kx] += acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_bias(const T* gy, int B, int F, int Ho, int Wo, T* gb) {
#pragma omp parallel for schedule(static)
  for (int f = 0; f < F; ++f) {
    T acc = T(0);
    for (int b = 0; b < B; ++b) {
      const T* gyf = gy + (static_cast<int64_t>(b) * F + f) * Ho * Wo;
      for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i) acc += gyf[i];
    }
    gb[f] += acc;
  }
}

template <typename T>
void maxpool2_forward(const T* x, int B, int C, int H, int W, T* y, int64_t* argmax) {
  const int Ho = H / 2, Wo = W / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const int64_t in_base = (static_cast<int64_t>(b) * C + c) * H * W;
      const int64_t out_base = (static_cast<int64_t>(b) * C + c) * Ho * Wo;
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          // strict > keeps the first (row-major) occurrence on ties
          int64_t best = in_base + static_cast<int64_t>(2 * oy) * W + 2 * ox;
          T bv = x[best];
          const int64_t cands[3] = {best + 1, best + W, best + W + 1};
          for (int64_t idx : cands) {
            if (x[idx] > bv) {
              bv = x[idx];
              best = idx;
            }
          }
          const int64_t o = out_base + static_cast<int64_t>(oy) * Wo + ox;
          y[o] = bv;
          argmax[o] = best;
        }
      }
    }
  }
}

template <typename T>
void maxpool2_backward(const T* gy, const int64_t* argmax, int64_t n_out, T* gx) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n_out; ++i) gx[argmax[i]] += gy[i];  // windows are disjoint
}

template <typename T>
void upsample2_forward(const T* x, int B, int C, int H, int W, T* y) {
  const int64_t planes = static_cast<int64_t>(B) * C;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const T* xp = x + p * H * W;
    T* yp = y + p * 4 * H * W;
    for (int iy = 0; iy < H; ++iy) {
      for (int ix = 0; ix < W; ++ix) {
        const T v = xp[iy * W + ix];
        T* dst = yp + static_cast<int64_t>(2 * iy) * 2 * W + 2 * ix;
        dst[0] = v;
        dst[1] = v;
        dst[2 * W] = v;
        dst[2 * W + 1] = v;
      }
    }
  }
}

template <typename T>
void upsample2_backward(const T* gy, int B, int C, int H, int W, T* gx) {
  const int64_t planes = static_cast<int64_t>(B) * C;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const T* gyp = gy + p * 4 * H * W;
    T* gxp = gx + p * H * W;
    for (int iy = 0; iy < H; ++iy) {
      for (int ix = 0; ix < W; ++ix) {
        const T* src = gyp + static_cast<int64_t>(2 * iy) * 2 * W + 2 * ix;
        gxp[iy * W + ix] += src[0] + src[1] + src[2 * W] + src[2 * W + 1];
      }
    }
  }
}

template <typename T>
void sigmoid_forward(const T* x, int64_t n, T* y) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
}

template <typename T>
void sigmoid_backward(const T* gy, const T* y, int64_t n, T* gx) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * y[i] * (T(1) - y[i]);
}

template <typename T>
void relu_forward(const T* x, int64_t n, T* y) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* gy, const T* x, int64_t n, T* gx) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i)
    if (x[i] > T(0)) gx[i] += gy[i];
}

template <typename T>
void linear_forward(const T* x, int B, int C, const T* w, int O, const T* bias, T* y) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < B; ++b) {
    for (int o = 0; o < O; ++o) {
      T acc = bias ? bias[o] : T(0);
      const T* xb = x + static_cast<int64_t>(b) * C;
      const T* wo = w + static_cast<int64_t>(o) * C;
      for (int c = 0; c < C; ++c) acc += xb[c] * wo[c];
      y[static_cast<int64_t>(b) * O + o] = acc;
    }
  }
}

template <typename T>
void linear_backward_input(const T* gy, int B, int O, const T* w, int C, T* gx) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    const T* gyb = gy + static_cast<int64_t>(b) * O;
    T* gxb = gx + static_cast<int64_t>(b) * C;
    for (int o = 0; o < O; ++o) {
      const T g = gyb[o];
      const T* wo = w + static_cast<int64_t>(o) * C;
      for (int c = 0; c < C; ++c) gxb[c] += g * wo[c];
    }
  }
}

template <typename T>
void linear_backward_weight(const T* gy, int B, int O, const T* x, int C, T* gw) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < O; ++o) {
    T* gwo = gw + static_cast<int64_t>(o) * C;
    for (int b = 0; b < B; ++b) {
      const T g = gy[static_cast<int64_t>(b) * O + o];
      const T* xb = x + static_cast<int64_t>(b) * C;
      for (int c = 0; c < C; ++c) gwo[c] += g * xb[c];
    }
  }
}

template <typename T>
void linear_backward_bias(const T* gy, int B, int O, T* gb) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < O; ++o) {
    T acc = T(0);
    for (int b = 0; b < B; ++b) acc += gy[static_cast<int64_t>(b) * O + o];
    gb[o] += acc;
  }
}

template <typename T>
void gap_forward(const T* x, int B, int C, int H, int W, T* y) {
  const int64_t planes = static_cast<int64_t>(B) * C;
  const T inv = T(1) / static_cast<T>(H * W);
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const T* xp = x + p * H * W;
    T acc = T(0);
    for (int64_t i = 0; i < static_cast<int64_t>(H) * W; ++i) acc += xp[i];
    y[p] = acc * inv;
  }
}

template <typename T>
void gap_backward(const T* gy, int B, int C, int H, int W, T* gx) {
  const int64_t planes = static_cast<int64_t>(B) * C;
  const T inv = T(1) / static_cast<T>(H * W);
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const T g = gy[p] * inv;
    T* gxp = gx + p * H * W;
    for (int64_t i = 0; i < static_cast<int64_t>(H) * W; ++i) gxp[i] += g;
  }
}

#define ATTNET_INSTANTIATE(T)                                                          \
  template void conv2d_forward<T>(const T*, int, int, int, int, const T*, int, int,   \
                                  const T*, int, T*, int, int);                        \
  template void conv2d_backward_input<T>(const T*, int, int, int, int, const T*, int, \
                                         int, int, T*, int, int);                     \
  template void conv2d_backward_weight<T>(const T*, int, int, int, int, const T*,     \
                                          int, int, int, int, int, T*);               \
  template void conv2d_backward_bias<T>(const T*, int, int, int, int, T*);            \
  template void maxpool2_forward<T>(const T*, int, int, int, int, T*, int64_t*);      \
  template void maxpool2_backward<T>(const T*, const int64_t*, int64_t, T*);          \
  template void upsample2_forward<T>(const T*, int, int, int, int, T*);               \
  template void upsample2_backward<T>(const T*, int, int, int, int, T*);              \
  template void sigmoid_forward<T>(const T*, int64_t, T*);                            \
  template void sigmoid_backward<T>(const T*, const T*, int64_t, T*);                 \
  template void relu_forward<T>(const T*, int64_t, T*);                               \
  template void relu_backward<T>(const T*, const T*, int64_t, T*);                    \
  template void linear_forward<T>(const T*, int, int, const T*, int, const T*, T*);   \
  template void linear_backward_input<T>(const T*, int, int, const T*, int, T*);      \
  template void linear_backward_weight<T>(const T*, int, int, const T*, int, T*);     \
  template void linear_backward_bias<T>(const T*, int, int, T*);                      \
  template void gap_forward<T>(const T*, int, int, int, int, T*);                     \
  template void gap_backward<T>(const T*, int, int, int, int, T*);

ATTNET_INSTANTIATE(float)
ATTNET_INSTANTIATE(double)
#undef ATTNET_INSTANTIATE

}  // namespace attnet::kernels
