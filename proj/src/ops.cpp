#include "attnet/ops.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "attnet/kernels.hpp"

namespace attnet::ops {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

template <typename T>
TensorPtr<T> conv2d(Graph<T>& g, const TensorPtr<T>& x, const TensorPtr<T>& w,
                    const TensorPtr<T>& b, int pad) {
  if (x->rank() != 4)
    fail("conv2d: input must be rank-4 NCHW, got " + shape_str(x->shape));
  if (w->rank() != 4 || w->dim(2) != w->dim(3))
    fail("conv2d: weight must be {F,C,k,k}, got " + shape_str(w->shape));
  const int k = w->dim(2);
  if (k % 2 == 0) fail("conv2d: kernel size must be odd, got k=" + std::to_string(k));
  if (w->dim(1) != x->dim(1))
    fail("conv2d: weight " + shape_str(w->shape) + " does not match input channels of " +
         shape_str(x->shape));
  if (pad < 0) fail("conv2d: pad must be >= 0, got " + std::to_string(pad));
  const int B = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  const int F = w->dim(0);
  const int Ho = H + 2 * pad - k + 1, Wo = W + 2 * pad - k + 1;
  if (Ho <= 0 || Wo <= 0)
    fail("conv2d: kernel k=" + std::to_string(k) + " pad=" + std::to_string(pad) +
         " exceeds input " + shape_str(x->shape));
  if (b && (b->rank() != 1 || b->dim(0) != F))
    fail("conv2d: bias must be {" + std::to_string(F) + "}, got " + shape_str(b->shape));

  const bool rg = x->requires_grad || w->requires_grad || (b && b->requires_grad);
  auto y = make_tensor<T>({B, F, Ho, Wo}, rg);
  kernels::conv2d_forward(x->ptr(), B, C, H, W, w->ptr(), F, k,
                          b ? b->ptr() : nullptr, pad, y->ptr(), Ho, Wo);
  if (rg) {
    g.record("conv2d", y, [x, w, b, y, B, C, H, W, F, k, pad, Ho, Wo] {
      if (x->requires_grad)
        kernels::conv2d_backward_input(y->gptr(), B, F, Ho, Wo, w->ptr(), C, k, pad,
                                       x->gptr(), H, W);
      if (w->requires_grad)
        kernels::conv2d_backward_weight(y->gptr(), B, F, Ho, Wo, x->ptr(), C, H, W, k,
                                        pad, w->gptr());
      if (b && b->requires_grad)
        kernels::conv2d_backward_bias(y->gptr(), B, F, Ho, Wo, b->gptr());
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> maxpool2(Graph<T>& g, const TensorPtr<T>& x) {
  if (x->rank() != 4)
    fail("maxpool2: input must be rank-4 NCHW, got " + shape_str(x->shape));
  const int B = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  if (H % 2 != 0 || W % 2 != 0)
    fail("maxpool2: spatial dims must be even, got " + shape_str(x->shape));
  auto y = make_tensor<T>({B, C, H / 2, W / 2}, x->requires_grad);
  auto argmax = std::make_shared<std::vector<int64_t>>(y->data.size());
  kernels::maxpool2_forward(x->ptr(), B, C, H, W, y->ptr(), argmax->data());
  if (x->requires_grad) {
    g.record("maxpool2", y, [x, y, argmax] {
      kernels::maxpool2_backward(y->gptr(), argmax->data(), y->size(), x->gptr());
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> upsample2_nearest(Graph<T>& g, const TensorPtr<T>& x) {
  if (x->rank() != 4)
    fail("upsample2_nearest: input must be rank-4 NCHW, got " + shape_str(x->shape));
  const int B = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  auto y = make_tensor<T>({B, C, 2 * H, 2 * W}, x->requires_grad);
  kernels::upsample2_forward(x->ptr(), B, C, H, W, y->ptr());
  if (x->requires_grad) {
    g.record("upsample2_nearest", y, [x, y, B, C, H, W] {
      kernels::upsample2_backward(y->gptr(), B, C, H, W, x->gptr());
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> sigmoid(Graph<T>& g, const TensorPtr<T>& x) {
  auto y = make_tensor<T>(x->shape, x->requires_grad);
  kernels::sigmoid_forward(x->ptr(), x->size(), y->ptr());
  if (x->requires_grad) {
    g.record("sigmoid", y, [x, y] {
      kernels::sigmoid_backward(y->gptr(), y->ptr(), y->size(), x->gptr());
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> relu(Graph<T>& g, const TensorPtr<T>& x) {
  auto y = make_tensor<T>(x->shape, x->requires_grad);
  kernels::relu_forward(x->ptr(), x->size(), y->ptr());
  if (x->requires_grad) {
    g.record("relu", y, [x, y] {
      kernels::relu_backward(y->gptr(), x->ptr(), y->size(), x->gptr());
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> concat_channels(Graph<T>& g, const std::vector<TensorPtr<T>>& xs) {
  if (xs.empty()) fail("concat_channels: no inputs");
  for (const auto& t : xs)
    if (t->rank() != 4)
      fail("concat_channels: inputs must be rank-4 NCHW, got " + shape_str(t->shape));
  const int B = xs[0]->dim(0), H = xs[0]->dim(2), W = xs[0]->dim(3);
  int Cout = 0;
  bool rg = false;
  for (const auto& t : xs) {
    if (t->dim(0) != B || t->dim(2) != H || t->dim(3) != W)
      fail("concat_channels: " + shape_str(t->shape) + " does not align with " +
           shape_str(xs[0]->shape));
    Cout += t->dim(1);
    rg = rg || t->requires_grad;
  }
  auto y = make_tensor<T>({B, Cout, H, W}, rg);
  const int64_t plane = static_cast<int64_t>(H) * W;
  int64_t coff = 0;
  for (const auto& t : xs) {
    const int Ci = t->dim(1);
    for (int b = 0; b < B; ++b)
      std::copy_n(t->ptr() + static_cast<int64_t>(b) * Ci * plane, Ci * plane,
                  y->ptr() + (static_cast<int64_t>(b) * Cout + coff) * plane);
    coff += Ci;
  }
  if (rg) {
    g.record("concat_channels", y, [xs, y, B, Cout, plane] {
      int64_t off = 0;
      for (const auto& t : xs) {
        const int Ci = t->dim(1);
        if (t->requires_grad) {
          for (int b = 0; b < B; ++b) {
            const T* src = y->gptr() + (static_cast<int64_t>(b) * Cout + off) * plane;
            T* dst = t->gptr() + static_cast<int64_t>(b) * Ci * plane;
            for (int64_t i = 0; i < Ci * plane; ++i) dst[i] += src[i];
          }
        }
        off += Ci;
      }
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> linear(Graph<T>& g, const TensorPtr<T>& x, const TensorPtr<T>& w,
                    const TensorPtr<T>& b) {
  if (x->rank() != 2) fail("linear: input must be rank-2 {B,C}, got " + shape_str(x->shape));
  if (w->rank() != 2 || w->dim(1) != x->dim(1))
    fail("linear: weight " + shape_str(w->shape) + " does not match input " +
         shape_str(x->shape));
  const int B = x->dim(0), C = x->dim(1), O = w->dim(0);
  if (b && (b->rank() != 1 || b->dim(0) != O))
    fail("linear: bias must be {" + std::to_string(O) + "}, got " + shape_str(b->shape));
  const bool rg = x->requires_grad || w->requires_grad || (b && b->requires_grad);
  auto y = make_tensor<T>({B, O}, rg);
  kernels::linear_forward(x->ptr(), B, C, w->ptr(), O, b ? b->ptr() : nullptr, y->ptr());
  if (rg) {
    g.record("linear", y, [x, w, b, y, B, C, O] {
      if (x->requires_grad)
        kernels::linear_backward_input(y->gptr(), B, O, w->ptr(), C, x->gptr());
      if (w->requires_grad)
        kernels::linear_backward_weight(y->gptr(), B, O, x->ptr(), C, w->gptr());
      if (b && b->requires_grad) kernels::linear_backward_bias(y->gptr(), B, O, b->gptr());
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> global_avg_pool(Graph<T>& g, const TensorPtr<T>& x) {
  if (x->rank() != 4)
    fail("global_avg_pool: input must be rank-4 NCHW, got " + shape_str(x->shape));
  const int B = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  auto y = make_tensor<T>({B, C}, x->requires_grad);
  kernels::gap_forward(x->ptr(), B, C, H, W, y->ptr());
  if (x->requires_grad) {
    g.record("global_avg_pool", y, [x, y, B, C, H, W] {
      kernels::gap_backward(y->gptr(), B, C, H, W, x->gptr());
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> add(Graph<T>& g, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape != b->shape)
    fail("add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  const bool rg = a->requires_grad || b->requires_grad;
  auto y = make_tensor<T>(a->shape, rg);
  for (int64_t i = 0; i < y->size(); ++i) y->data[i] = a->data[i] + b->data[i];
  if (rg) {
    g.record("add", y, [a, b, y] {
      if (a->requires_grad)
        for (int64_t i = 0; i < y->size(); ++i) a->grad[i] += y->grad[i];
      if (b->requires_grad)
        for (int64_t i = 0; i < y->size(); ++i) b->grad[i] += y->grad[i];
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> mul(Graph<T>& g, const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape != b->shape)
    fail("mul: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  const bool rg = a->requires_grad || b->requires_grad;
  auto y = make_tensor<T>(a->shape, rg);
  for (int64_t i = 0; i < y->size(); ++i) y->data[i] = a->data[i] * b->data[i];
  if (rg) {
    g.record("mul", y, [a, b, y] {
      if (a->requires_grad)
        for (int64_t i = 0; i < y->size(); ++i) a->grad[i] += y->grad[i] * b->data[i];
      if (b->requires_grad)
        for (int64_t i = 0; i < y->size(); ++i) b->grad[i] += y->grad[i] * a->data[i];
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> scale(Graph<T>& g, const TensorPtr<T>& x, T factor) {
  auto y = make_tensor<T>(x->shape, x->requires_grad);
  for (int64_t i = 0; i < y->size(); ++i) y->data[i] = x->data[i] * factor;
  if (x->requires_grad) {
    g.record("scale", y, [x, y, factor] {
      for (int64_t i = 0; i < y->size(); ++i) x->grad[i] += y->grad[i] * factor;
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> sum(Graph<T>& g, const TensorPtr<T>& x) {
  auto y = make_tensor<T>({1}, x->requires_grad);
  T acc = T(0);
  for (int64_t i = 0; i < x->size(); ++i) acc += x->data[i];
  y->data[0] = acc;
  if (x->requires_grad) {
    g.record("sum", y, [x, y] {
      const T gy = y->grad[0];
      for (int64_t i = 0; i < x->size(); ++i) x->grad[i] += gy;
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> mean(Graph<T>& g, const TensorPtr<T>& x) {
  auto y = make_tensor<T>({1}, x->requires_grad);
  T acc = T(0);
  for (int64_t i = 0; i < x->size(); ++i) acc += x->data[i];
  const T inv = T(1) / static_cast<T>(x->size());
  y->data[0] = acc * inv;
  if (x->requires_grad) {
    g.record("mean", y, [x, y, inv] {
      const T gy = y->grad[0] * inv;
      for (int64_t i = 0; i < x->size(); ++i) x->grad[i] += gy;
    });
  }
  return y;
}

#define ATTNET_INSTANTIATE(T)                                                           \
  template TensorPtr<T> conv2d<T>(Graph<T>&, const TensorPtr<T>&, const TensorPtr<T>&, \
                                  const TensorPtr<T>&, int);                            \
  template TensorPtr<T> maxpool2<T>(Graph<T>&, const TensorPtr<T>&);                   \
  template TensorPtr<T> upsample2_nearest<T>(Graph<T>&, const TensorPtr<T>&);          \
  template TensorPtr<T> sigmoid<T>(Graph<T>&, const TensorPtr<T>&);                    \
  template TensorPtr<T> relu<T>(Graph<T>&, const TensorPtr<T>&);                       \
  template TensorPtr<T> concat_channels<T>(Graph<T>&,                                  \
                                           const std::vector<TensorPtr<T>>&);          \
  template TensorPtr<T> linear<T>(Graph<T>&, const TensorPtr<T>&, const TensorPtr<T>&, \
                                  const TensorPtr<T>&);                                 \
  template TensorPtr<T> global_avg_pool<T>(Graph<T>&, const TensorPtr<T>&);            \
  template TensorPtr<T> add<T>(Graph<T>&, const TensorPtr<T>&, const TensorPtr<T>&);   \
  template TensorPtr<T> mul<T>(Graph<T>&, const TensorPtr<T>&, const TensorPtr<T>&);   \
  template TensorPtr<T> scale<T>(Graph<T>&, const TensorPtr<T>&, T);                   \
  template TensorPtr<T> sum<T>(Graph<T>&, const TensorPtr<T>&);                        \
  template TensorPtr<T> mean<T>(Graph<T>&, const TensorPtr<T>&);

ATTNET_INSTANTIATE(float)
ATTNET_INSTANTIATE(double)
#undef ATTNET_INSTANTIATE

}  // namespace attnet::ops
