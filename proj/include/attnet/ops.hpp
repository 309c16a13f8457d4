#pragma once

#include <vector>

#include "attnet/tensor.hpp"

// Differentiable graph operations. Each op validates shapes (throwing
// std::invalid_argument with the offending shapes in the message), runs the
// forward kernel, and — when any input requires gradients — records a
// backward closure on the tape. Gradients always accumulate (+=) into the
// inputs' grad buffers.

namespace attnet::ops {

// x {B,C,H,W}, w {F,C,k,k} with odd k, bias {F} or nullptr. Stride 1,
// symmetric zero padding. Output {B,F,H+2p-k+1,W+2p-k+1}.
template <typename T>
TensorPtr<T> conv2d(Graph<T>& g, const TensorPtr<T>& x, const TensorPtr<T>& w,
                    const TensorPtr<T>& b, int pad);

// 2x2 window, stride 2; requires even H and W.
template <typename T>
TensorPtr<T> maxpool2(Graph<T>& g, const TensorPtr<T>& x);

// Nearest-neighbour 2x upsampling: each input pixel becomes a 2x2 block.
template <typename T>
TensorPtr<T> upsample2_nearest(Graph<T>& g, const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> sigmoid(Graph<T>& g, const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> relu(Graph<T>& g, const TensorPtr<T>& x);

// Concatenate along the channel axis; all inputs {B,C_i,H,W} with matching
// B, H, W.
template <typename T>
TensorPtr<T> concat_channels(Graph<T>& g, const std::vector<TensorPtr<T>>& xs);

// x {B,C}, w {O,C}, bias {O} or nullptr. Output {B,O}.
template <typename T>
TensorPtr<T> linear(Graph<T>& g, const TensorPtr<T>& x, const TensorPtr<T>& w,
                    const TensorPtr<T>& b);

// x {B,C,H,W} -> {B,C}: mean over the spatial plane.
template <typename T>
TensorPtr<T> global_avg_pool(Graph<T>& g, const TensorPtr<T>& x);

// Elementwise; shapes must match exactly.
template <typename T>
TensorPtr<T> add(Graph<T>& g, const TensorPtr<T>& a, const TensorPtr<T>& b);

template <typename T>
TensorPtr<T> mul(Graph<T>& g, const TensorPtr<T>& a, const TensorPtr<T>& b);

// Multiply by a compile-time-known constant.
template <typename T>
TensorPtr<T> scale(Graph<T>& g, const TensorPtr<T>& x, T factor);

// Full reductions to a {1} scalar.
template <typename T>
TensorPtr<T> sum(Graph<T>& g, const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> mean(Graph<T>& g, const TensorPtr<T>& x);

}  // namespace attnet::ops
