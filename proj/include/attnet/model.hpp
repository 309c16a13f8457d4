#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "attnet/rng.hpp"
#include "attnet/tensor.hpp"

// The encoder (dense blocks with two downsamplings and a sigmoid bottleneck
// that emits the supervision channels) and the two posterior heads: an
// upsampling segmentation decoder over the multi-level features and a
// coordinate-regression localization head over the deepest features.

namespace attnet::model {

struct ModelConfig {
  int growth_rate = 8;          // channels added by each dense-block layer
  int bottleneck_channels = 4;  // supervision channels N
  std::array<int, 3> level_channels = {16, 32, 64};
  int layers_per_block = 4;
  int input_channels = 1;

  // Throws std::invalid_argument. Note the structural constraint
  // level_channels[2] == level_channels[1] + layers_per_block*growth_rate:
  // the deepest feature map is the third block's raw concatenation, with no
  // transition conv behind it.
  void validate() const;
};

template <typename T>
struct DenseBlock {
  std::vector<TensorPtr<T>> w;  // layer i: {K, in + i*K, 3, 3}
  std::vector<TensorPtr<T>> b;  // layer i: {K}
};

template <typename T>
struct EncoderState {
  ModelConfig config;
  TensorPtr<T> top_w, top_b;  // 3x3, input -> level_channels[0]
  DenseBlock<T> db1, db2, db3;
  TensorPtr<T> trans1_w, trans1_b;  // 1x1 after db1 -> level_channels[0]
  TensorPtr<T> trans2_w, trans2_b;  // 1x1 after db2 -> level_channels[1]
  TensorPtr<T> bottleneck_w, bottleneck_b;  // 1x1 -> bottleneck_channels
};

template <typename T>
struct SegDecoderState {
  ModelConfig config;
  TensorPtr<T> up1_w, up1_b;  // 3x3 on concat(up(f4), f2)
  TensorPtr<T> up2_w, up2_b;  // 3x3 on concat(up(.), f1)
  TensorPtr<T> head_w, head_b;  // 1x1 -> bottleneck_channels
};

template <typename T>
struct LocHeadState {
  ModelConfig config;
  TensorPtr<T> conv_w, conv_b;  // 3x3 on f4
  TensorPtr<T> fc_w, fc_b;      // affine to (cx, cy)
};

// He-uniform weights (bound sqrt(6/fan_in)) drawn from `rng` in a fixed
// tensor-by-tensor, row-major order; biases zero.
template <typename T>
EncoderState<T> init_encoder(const ModelConfig& cfg, Rng& rng);
template <typename T>
SegDecoderState<T> init_seg_decoder(const ModelConfig& cfg, Rng& rng);
template <typename T>
LocHeadState<T> init_loc_head(const ModelConfig& cfg, Rng& rng);

template <typename T>
struct EncoderOut {
  TensorPtr<T> f1;           // {B, level[0], H,   W}
  TensorPtr<T> f2;           // {B, level[1], H/2, W/2}
  TensorPtr<T> f4;           // {B, level[2], H/4, W/4}
  TensorPtr<T> supervision;  // {B, N, H/4, W/4}, post-sigmoid
};

template <typename T>
EncoderOut<T> encoder_forward(Graph<T>& g, const EncoderState<T>& s,
                              const TensorPtr<T>& image);

// Full-resolution per-pixel scores, post-sigmoid: {B, N, H, W}.
template <typename T>
TensorPtr<T> seg_decoder_forward(Graph<T>& g, const SegDecoderState<T>& s,
                                 const TensorPtr<T>& f1, const TensorPtr<T>& f2,
                                 const TensorPtr<T>& f4);

// Normalized (cx, cy) in (0,1)^2: {B, 2}.
template <typename T>
TensorPtr<T> loc_head_forward(Graph<T>& g, const LocHeadState<T>& s,
                              const TensorPtr<T>& f4);

template <typename T>
using NamedParams = std::vector<std::pair<std::string, TensorPtr<T>>>;

template <typename T>
NamedParams<T> named_params(const EncoderState<T>& s);
template <typename T>
NamedParams<T> named_params(const SegDecoderState<T>& s);
template <typename T>
NamedParams<T> named_params(const LocHeadState<T>& s);

template <typename T>
std::vector<TensorPtr<T>> param_list(const NamedParams<T>& named);

template <typename T>
int64_t count_parameters(const NamedParams<T>& named);

}  // namespace attnet::model
