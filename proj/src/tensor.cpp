#include "attnet/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace attnet {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
void Graph<T>::backward(const TensorPtr<T>& loss) {
  if (!loss || !loss->is_scalar())
    throw std::invalid_argument("backward: loss must be a scalar tensor, got shape " +
                                (loss ? shape_str(loss->shape) : std::string("null")));
  if (!loss->requires_grad)
    throw std::invalid_argument("backward: loss is not connected to any parameter");

  for (auto& op : ops_)
    if (op.output->requires_grad) op.output->zero_grad();
  loss->grad[0] = T(1);

  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->fn();
}

template class Graph<float>;
template class Graph<double>;

}  // namespace attnet
