#pragma once

#include "attnet/tensor.hpp"

namespace attnet::losses {

// 1 - mean over the B*N maps of 2*sum(p*g) / (sum(p^2) + sum(g^2) + eps).
// eps keeps all-zero map pairs finite (their dice contribution is 0, a
// deliberate convention for unused supervision channels). Differentiable in
// both arguments and symmetric under swapping them.
template <typename T>
TensorPtr<T> dice_loss(Graph<T>& g, const TensorPtr<T>& pred, const TensorPtr<T>& target,
                       T epsilon);

// Mean squared error over batch and both coordinates: sum((p-t)^2) / (2B).
template <typename T>
TensorPtr<T> loc_loss(Graph<T>& g, const TensorPtr<T>& pred, const TensorPtr<T>& target);

}  // namespace attnet::losses
