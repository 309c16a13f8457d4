#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace attnet {

using Shape = std::vector<int>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major n-d array with an optional gradient buffer.
template <typename T>
struct TensorData {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // same length as data iff requires_grad

  TensorData() = default;
  explicit TensorData(Shape s, bool rg = false)
      : shape(std::move(s)),
        data(static_cast<size_t>(numel(shape)), T(0)),
        requires_grad(rg),
        grad(rg ? data.size() : 0, T(0)) {}

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }
  bool is_scalar() const { return data.size() == 1; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  T* gptr() { return grad.data(); }
  const T* gptr() const { return grad.data(); }

  void set_requires_grad(bool rg) {
    requires_grad = rg;
    grad.assign(rg ? data.size() : 0, T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
using TensorPtr = std::shared_ptr<TensorData<T>>;

template <typename T>
TensorPtr<T> make_tensor(Shape shape, bool requires_grad = false) {
  return std::make_shared<TensorData<T>>(std::move(shape), requires_grad);
}

template <typename T>
TensorPtr<T> full_like_values(Shape shape, const std::vector<T>& values,
                              bool requires_grad = false) {
  auto t = make_tensor<T>(std::move(shape), requires_grad);
  t->data = values;
  return t;
}

// Deep copy of values only; result does not require gradients.
template <typename T>
TensorPtr<T> detach(const TensorPtr<T>& t) {
  auto out = make_tensor<T>(t->shape, false);
  out->data = t->data;
  return out;
}

template <typename To, typename From>
TensorPtr<To> cast_tensor(const TensorPtr<From>& t) {
  auto out = make_tensor<To>(t->shape, t->requires_grad);
  for (size_t i = 0; i < t->data.size(); ++i)
    out->data[i] = static_cast<To>(t->data[i]);
  return out;
}

// Ordered tape of executed operations. backward() replays the records in
// exact reverse of the recorded order, which is a valid topological order
// because operations append themselves as they execute.
//
// Gradient buffers of op outputs are reset at the start of each backward()
// so a tape can be replayed repeatedly; leaf tensors (parameters, inputs)
// keep accumulating until explicitly zeroed.
template <typename T>
class Graph {
 public:
  void record(const char* name, TensorPtr<T> output, std::function<void()> backward_fn) {
    ops_.push_back(OpRecord{name, std::move(output), std::move(backward_fn)});
  }

  size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

  void backward(const TensorPtr<T>& loss);

 private:
  struct OpRecord {
    const char* name;
    TensorPtr<T> output;
    std::function<void()> fn;
  };
  std::vector<OpRecord> ops_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace attnet
