#include "attnet/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace attnet {

template <typename T>
Adam<T>::Adam(std::vector<TensorPtr<T>> params, AdamConfig<T> cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    const auto& p = params_[i];
    if (!p) throw std::invalid_argument("adam: parameter " + std::to_string(i) + " is null");
    if (!p->requires_grad)
      throw std::invalid_argument("adam: parameter " + std::to_string(i) + " with shape " +
                                  shape_str(p->shape) + " has no gradient buffer");
    m_.emplace_back(p->data.size(), T(0));
    v_.emplace_back(p->data.size(), T(0));
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
  const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < p.data.size(); ++j) {
      const T gj = p.grad[j];
      m[j] = cfg_.beta1 * m[j] + (T(1) - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (T(1) - cfg_.beta2) * gj * gj;
      const T mh = m[j] / bc1;
      const T vh = v[j] / bc2;
      p.data[j] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace attnet
