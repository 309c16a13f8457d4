#pragma once

#include <cstdint>
#include <vector>

#include "attnet/attention.hpp"

// Slow, obviously-correct serial versions of the hot kernels and of the
// geometric transforms, written directly from their definitions. The tests
// compare the optimized paths against these; the benchmark binary times the
// kernel pairs against each other. Nothing here shares loop structure with
// the optimized code.
namespace attnet::ref {

template <typename T>
void conv2d_forward(const T* x, int B, int C, int H, int W, const T* w, int F, int k,
                    const T* bias, int pad, T* y, int Ho, int Wo);

template <typename T>
void conv2d_backward_input(const T* gy, int B, int F, int Ho, int Wo, const T* w, int C, int k,
                           int pad, T* gx, int H, int W);

template <typename T>
void conv2d_backward_weight(const T* gy, int B, int F, int Ho, int Wo, const T* x, int C, int H,
                            int W, int k, int pad, T* gw);

template <typename T>
void maxpool2_forward(const T* x, int B, int C, int H, int W, T* y, int64_t* argmax);

// mask(y,x) != 0 is foreground; out(i,j) = mask(i*factor, j*factor).
std::vector<uint8_t> lattice_downsample(const std::vector<uint8_t>& mask, int H, int W,
                                        int factor);

// Foreground cells with a 4-neighbour that is background or off the grid.
std::vector<uint8_t> boundary4(const std::vector<uint8_t>& mask, int H, int W);

// Exact squared Euclidean distance to the nearest site, O(n * #sites).
std::vector<int64_t> euclidean_sq(const std::vector<uint8_t>& sites, int H, int W);

std::vector<int32_t> chebyshev(const std::vector<uint8_t>& sites, int H, int W);

// Symmetric 95th-percentile boundary distance, brute force end to end.
double hausdorff95(const attention::Mask& pred, const attention::Mask& truth);

// The three attention-map transforms recomputed from their definitions in
// double precision (dense 2-D blur, O(n^2) distances).
std::vector<double> shape_map(const attention::Mask& mask, int factor);
std::vector<double> contour_map(const attention::Mask& mask, int factor, double sigma);
std::vector<double> center_map(const attention::Mask& mask, int factor,
                               attention::DistMetric metric);

// Mean-over-maps dice loss on flat buffers: maps blocks of per_map values.
double dice_loss(const std::vector<double>& pred, const std::vector<double>& target,
                 int64_t maps, int64_t per_map, double eps);

}  // namespace attnet::ref
