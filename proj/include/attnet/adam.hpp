#pragma once

#include <cstdint>
#include <vector>

#include "attnet/tensor.hpp"

namespace attnet {

template <typename T>
struct AdamConfig {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// Adam with bias correction; eps is added outside the square root:
//   p -= lr * m_hat / (sqrt(v_hat) + eps)
// Every managed tensor must have requires_grad set (that is where the
// gradient lives); the constructor rejects anything else.
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<TensorPtr<T>> params, AdamConfig<T> cfg = {});

  void step();
  void zero_grad();
  int64_t steps() const { return t_; }

 private:
  std::vector<TensorPtr<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  AdamConfig<T> cfg_;
  int64_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace attnet
