#pragma once

#include <cstdint>

// Hot inner loops, shared by the autodiff ops and the benchmark binary.
// All kernels are deterministic for any OpenMP thread count: every output
// element is written by exactly one thread and its reduction order is fixed
// by the build, never by the schedule. Layout is row-major, NCHW, stride 1.

namespace attnet::kernels {

// y[b,f,oy,ox] = bias[f] + sum_{c,ky,kx} x[b,c,oy+ky-pad,ox+kx-pad] * w[f,c,ky,kx]
template <typename T>
void conv2d_forward(const T* x, int B, int C, int H, int W,
                    const T* w, int F, int k, const T* bias, int pad,
                    T* y, int Ho, int Wo);

// gx += conv2d gradient w.r.t. the input (gather form, one row per thread).
template <typename T>
void conv2d_backward_input(const T* gy, int B, int F, int Ho, int Wo,
                           const T* w, int C, int k, int pad,
                           T* gx, int H, int W);

template <typename T>
void conv2d_backward_weight(const T* gy, int B, int F, int Ho, int Wo,
                            const T* x, int C, int H, int W, int k, int pad,
                            T* gw);

template <typename T>
void conv2d_backward_bias(const T* gy, int B, int F, int Ho, int Wo, T* gb);

// 2x2 max pooling; argmax stores the flat input index of the winning element,
// first occurrence in row-major window order on ties.
template <typename T>
void maxpool2_forward(const T* x, int B, int C, int H, int W, T* y, int64_t* argmax);

template <typename T>
void maxpool2_backward(const T* gy, const int64_t* argmax, int64_t n_out, T* gx);

template <typename T>
void upsample2_forward(const T* x, int B, int C, int H, int W, T* y);

// gx += sum of the four replicated gradient cells.
template <typename T>
void upsample2_backward(const T* gy, int B, int C, int H, int W, T* gx);

template <typename T>
void sigmoid_forward(const T* x, int64_t n, T* y);

template <typename T>
void sigmoid_backward(const T* gy, const T* y, int64_t n, T* gx);

template <typename T>
void relu_forward(const T* x, int64_t n, T* y);

template <typename T>
void relu_backward(const T* gy, const T* x, int64_t n, T* gx);

// y[b,o] = bias[o] + sum_c x[b,c] * w[o,c]
template <typename T>
void linear_forward(const T* x, int B, int C, const T* w, int O, const T* bias, T* y);

template <typename T>
void linear_backward_input(const T* gy, int B, int O, const T* w, int C, T* gx);

template <typename T>
void linear_backward_weight(const T* gy, int B, int O, const T* x, int C, T* gw);

template <typename T>
void linear_backward_bias(const T* gy, int B, int O, T* gb);

// Spatial mean over HxW per (b,c).
template <typename T>
void gap_forward(const T* x, int B, int C, int H, int W, T* y);

template <typename T>
void gap_backward(const T* gy, int B, int C, int H, int W, T* gx);

int max_threads();
void set_threads(int n);

}  // namespace attnet::kernels
