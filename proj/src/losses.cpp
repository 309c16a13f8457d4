#include "attnet/losses.hpp"

#include <memory>
#include <stdexcept>
#include <vector>

namespace attnet::losses {

template <typename T>
TensorPtr<T> dice_loss(Graph<T>& g, const TensorPtr<T>& pred, const TensorPtr<T>& target,
                       T epsilon) {
  if (pred->rank() != 4)
    throw std::invalid_argument("dice_loss: inputs must be rank-4 {B,N,H,W}, got " +
                                shape_str(pred->shape));
  if (pred->shape != target->shape)
    throw std::invalid_argument("dice_loss: shape mismatch " + shape_str(pred->shape) +
                                " vs " + shape_str(target->shape));

  const int64_t M = static_cast<int64_t>(pred->dim(0)) * pred->dim(1);
  const int64_t plane = static_cast<int64_t>(pred->dim(2)) * pred->dim(3);
  auto spg = std::make_shared<std::vector<T>>(M);
  auto spp = std::make_shared<std::vector<T>>(M);
  auto sgg = std::make_shared<std::vector<T>>(M);

  const T* p = pred->ptr();
  const T* t = target->ptr();
#pragma omp parallel for schedule(static)
  for (int64_t m = 0; m < M; ++m) {
    T apg = T(0), app = T(0), agg = T(0);
    const T* pm = p + m * plane;
    const T* tm = t + m * plane;
    for (int64_t i = 0; i < plane; ++i) {
      apg += pm[i] * tm[i];
      app += pm[i] * pm[i];
      agg += tm[i] * tm[i];
    }
    (*spg)[m] = apg;
    (*spp)[m] = app;
    (*sgg)[m] = agg;
  }

  T mean_dice = T(0);
  for (int64_t m = 0; m < M; ++m)
    mean_dice += T(2) * (*spg)[m] / ((*spp)[m] + (*sgg)[m] + epsilon);
  mean_dice /= static_cast<T>(M);

  const bool rg = pred->requires_grad || target->requires_grad;
  auto y = make_tensor<T>({1}, rg);
  y->data[0] = T(1) - mean_dice;
  if (rg) {
    g.record("dice_loss", y, [pred, target, y, spg, spp, sgg, M, plane, epsilon] {
      const T gy = y->grad[0];
      const T invM = T(1) / static_cast<T>(M);
      const T* p = pred->ptr();
      const T* t = target->ptr();
#pragma omp parallel for schedule(static)
      for (int64_t m = 0; m < M; ++m) {
        const T D = (*spp)[m] + (*sgg)[m] + epsilon;
        const T c1 = T(2) / D;
        const T c2 = T(4) * (*spg)[m] / (D * D);
        const T* pm = p + m * plane;
        const T* tm = t + m * plane;
        // d(loss)/dx = -(1/M) * (2*other/D - 4*x*spg/D^2)
        if (pred->requires_grad) {
          T* gp = pred->gptr() + m * plane;
          for (int64_t i = 0; i < plane; ++i)
            gp[i] -= gy * invM * (c1 * tm[i] - c2 * pm[i]);
        }
        if (target->requires_grad) {
          T* gt = target->gptr() + m * plane;
          for (int64_t i = 0; i < plane; ++i)
            gt[i] -= gy * invM * (c1 * pm[i] - c2 * tm[i]);
        }
      }
    });
  }
  return y;
}

template <typename T>
TensorPtr<T> loc_loss(Graph<T>& g, const TensorPtr<T>& pred, const TensorPtr<T>& target) {
  if (pred->rank() != 2 || pred->dim(1) != 2)
    throw std::invalid_argument("loc_loss: inputs must be {B,2}, got " +
                                shape_str(pred->shape));
  if (pred->shape != target->shape)
    throw std::invalid_argument("loc_loss: shape mismatch " + shape_str(pred->shape) +
                                " vs " + shape_str(target->shape));
  const int64_t n = pred->size();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) {
    const T d = pred->data[i] - target->data[i];
    acc += d * d;
  }
  const bool rg = pred->requires_grad || target->requires_grad;
  auto y = make_tensor<T>({1}, rg);
  y->data[0] = acc / static_cast<T>(n);
  if (rg) {
    g.record("loc_loss", y, [pred, target, y, n] {
      const T c = y->grad[0] * T(2) / static_cast<T>(n);
      for (int64_t i = 0; i < n; ++i) {
        const T d = pred->data[i] - target->data[i];
        if (pred->requires_grad) pred->grad[i] += c * d;
        if (target->requires_grad) target->grad[i] -= c * d;
      }
    });
  }
  return y;
}

template TensorPtr<float> dice_loss<float>(Graph<float>&, const TensorPtr<float>&,
                                           const TensorPtr<float>&, float);
template TensorPtr<double> dice_loss<double>(Graph<double>&, const TensorPtr<double>&,
                                             const TensorPtr<double>&, double);
template TensorPtr<float> loc_loss<float>(Graph<float>&, const TensorPtr<float>&,
                                          const TensorPtr<float>&);
template TensorPtr<double> loc_loss<double>(Graph<double>&, const TensorPtr<double>&,
                                            const TensorPtr<double>&);

}  // namespace attnet::losses
