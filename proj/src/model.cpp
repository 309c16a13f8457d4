#include "attnet/model.hpp"

#include <cmath>
#include <stdexcept>

#include "attnet/ops.hpp"

namespace attnet::model {

void ModelConfig::validate() const {
  if (growth_rate < 1)
    throw std::invalid_argument("ModelConfig: growth_rate must be >= 1, got " +
                                std::to_string(growth_rate));
  if (bottleneck_channels < 1)
    throw std::invalid_argument("ModelConfig: bottleneck_channels must be >= 1, got " +
                                std::to_string(bottleneck_channels));
  if (layers_per_block < 1)
    throw std::invalid_argument("ModelConfig: layers_per_block must be >= 1, got " +
                                std::to_string(layers_per_block));
  if (input_channels < 1)
    throw std::invalid_argument("ModelConfig: input_channels must be >= 1, got " +
                                std::to_string(input_channels));
  if (!(level_channels[0] < level_channels[1] && level_channels[1] < level_channels[2]))
    throw std::invalid_argument("ModelConfig: level_channels must be strictly increasing, got {" +
                                std::to_string(level_channels[0]) + "," +
                                std::to_string(level_channels[1]) + "," +
                                std::to_string(level_channels[2]) + "}");
  if (level_channels[2] != level_channels[1] + layers_per_block * growth_rate)
    throw std::invalid_argument(
        "ModelConfig: level_channels[2] must equal level_channels[1] + "
        "layers_per_block*growth_rate (the deepest level is the third block's raw "
        "concatenation); got " +
        std::to_string(level_channels[2]) + " != " + std::to_string(level_channels[1]) +
        " + " + std::to_string(layers_per_block) + "*" + std::to_string(growth_rate));
}

namespace {

template <typename T>
TensorPtr<T> he_conv(Rng& rng, int out_ch, int in_ch, int k) {
  auto w = make_tensor<T>({out_ch, in_ch, k, k}, true);
  const double bound = std::sqrt(6.0 / (static_cast<double>(in_ch) * k * k));
  for (auto& v : w->data) v = static_cast<T>(rng.uniform(-bound, bound));
  return w;
}

template <typename T>
TensorPtr<T> he_linear(Rng& rng, int out_ch, int in_ch) {
  auto w = make_tensor<T>({out_ch, in_ch}, true);
  const double bound = std::sqrt(6.0 / static_cast<double>(in_ch));
  for (auto& v : w->data) v = static_cast<T>(rng.uniform(-bound, bound));
  return w;
}

template <typename T>
TensorPtr<T> zero_bias(int n) {
  return make_tensor<T>({n}, true);
}

template <typename T>
DenseBlock<T> init_block(const ModelConfig& cfg, Rng& rng, int in_ch) {
  DenseBlock<T> blk;
  for (int i = 0; i < cfg.layers_per_block; ++i) {
    blk.w.push_back(he_conv<T>(rng, cfg.growth_rate, in_ch + i * cfg.growth_rate, 3));
    blk.b.push_back(zero_bias<T>(cfg.growth_rate));
  }
  return blk;
}

template <typename T>
TensorPtr<T> dense_block_forward(Graph<T>& g, const DenseBlock<T>& blk,
                                 const TensorPtr<T>& x) {
  std::vector<TensorPtr<T>> feats{x};
  for (size_t i = 0; i < blk.w.size(); ++i) {
    auto in = feats.size() == 1 ? feats[0] : ops::concat_channels(g, feats);
    feats.push_back(ops::relu(g, ops::conv2d(g, in, blk.w[i], blk.b[i], 1)));
  }
  return ops::concat_channels(g, feats);
}

void check_feature(const Shape& got, int B, int C, int H, int W, const char* name) {
  const Shape want{B, C, H, W};
  if (got != want)
    throw std::invalid_argument(std::string("expected ") + name + " shape " +
                                shape_str(want) + ", got " + shape_str(got));
}

}  // namespace

template <typename T>
EncoderState<T> init_encoder(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const int L = cfg.layers_per_block, K = cfg.growth_rate;
  EncoderState<T> s;
  s.config = cfg;
  s.top_w = he_conv<T>(rng, cfg.level_channels[0], cfg.input_channels, 3);
  s.top_b = zero_bias<T>(cfg.level_channels[0]);
  s.db1 = init_block<T>(cfg, rng, cfg.level_channels[0]);
  s.trans1_w = he_conv<T>(rng, cfg.level_channels[0], cfg.level_channels[0] + L * K, 1);
  s.trans1_b = zero_bias<T>(cfg.level_channels[0]);
  s.db2 = init_block<T>(cfg, rng, cfg.level_channels[0]);
  s.trans2_w = he_conv<T>(rng, cfg.level_channels[1], cfg.level_channels[0] + L * K, 1);
  s.trans2_b = zero_bias<T>(cfg.level_channels[1]);
  s.db3 = init_block<T>(cfg, rng, cfg.level_channels[1]);
  s.bottleneck_w = he_conv<T>(rng, cfg.bottleneck_channels, cfg.level_channels[2], 1);
  s.bottleneck_b = zero_bias<T>(cfg.bottleneck_channels);
  return s;
}

template <typename T>
SegDecoderState<T> init_seg_decoder(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  SegDecoderState<T> s;
  s.config = cfg;
  s.up1_w = he_conv<T>(rng, cfg.level_channels[1], cfg.level_channels[2] + cfg.level_channels[1], 3);
  s.up1_b = zero_bias<T>(cfg.level_channels[1]);
  s.up2_w = he_conv<T>(rng, cfg.level_channels[0], cfg.level_channels[1] + cfg.level_channels[0], 3);
  s.up2_b = zero_bias<T>(cfg.level_channels[0]);
  s.head_w = he_conv<T>(rng, cfg.bottleneck_channels, cfg.level_channels[0], 1);
  s.head_b = zero_bias<T>(cfg.bottleneck_channels);
  return s;
}

template <typename T>
LocHeadState<T> init_loc_head(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  LocHeadState<T> s;
  s.config = cfg;
  s.conv_w = he_conv<T>(rng, cfg.level_channels[2], cfg.level_channels[2], 3);
  s.conv_b = zero_bias<T>(cfg.level_channels[2]);
  s.fc_w = he_linear<T>(rng, 2, cfg.level_channels[2]);
  s.fc_b = zero_bias<T>(2);
  return s;
}

template <typename T>
EncoderOut<T> encoder_forward(Graph<T>& g, const EncoderState<T>& s,
                              const TensorPtr<T>& image) {
  if (image->rank() != 4)
    throw std::invalid_argument("encoder_forward: image must be rank-4 NCHW, got " +
                                shape_str(image->shape));
  if (image->dim(1) != s.config.input_channels)
    throw std::invalid_argument("encoder_forward: expected " +
                                std::to_string(s.config.input_channels) +
                                " input channels, got " + shape_str(image->shape));
  if (image->dim(2) % 4 != 0 || image->dim(3) % 4 != 0)
    throw std::invalid_argument("encoder_forward: H and W must be divisible by 4, got " +
                                shape_str(image->shape));

  auto top = ops::relu(g, ops::conv2d(g, image, s.top_w, s.top_b, 1));
  auto d1 = dense_block_forward(g, s.db1, top);
  EncoderOut<T> out;
  out.f1 = ops::conv2d(g, d1, s.trans1_w, s.trans1_b, 0);
  auto p1 = ops::maxpool2(g, out.f1);
  auto d2 = dense_block_forward(g, s.db2, p1);
  out.f2 = ops::conv2d(g, d2, s.trans2_w, s.trans2_b, 0);
  auto p2 = ops::maxpool2(g, out.f2);
  out.f4 = dense_block_forward(g, s.db3, p2);
  out.supervision = ops::sigmoid(g, ops::conv2d(g, out.f4, s.bottleneck_w, s.bottleneck_b, 0));
  return out;
}

template <typename T>
TensorPtr<T> seg_decoder_forward(Graph<T>& g, const SegDecoderState<T>& s,
                                 const TensorPtr<T>& f1, const TensorPtr<T>& f2,
                                 const TensorPtr<T>& f4) {
  const auto& cfg = s.config;
  if (f4->rank() != 4)
    throw std::invalid_argument("seg_decoder_forward: f4 must be rank-4, got " +
                                shape_str(f4->shape));
  const int B = f4->dim(0), Hq = f4->dim(2), Wq = f4->dim(3);
  check_feature(f4->shape, B, cfg.level_channels[2], Hq, Wq, "f4");
  check_feature(f2->shape, B, cfg.level_channels[1], 2 * Hq, 2 * Wq, "f2");
  check_feature(f1->shape, B, cfg.level_channels[0], 4 * Hq, 4 * Wq, "f1");

  auto u1 = ops::concat_channels(g, {ops::upsample2_nearest(g, f4), f2});
  auto h1 = ops::relu(g, ops::conv2d(g, u1, s.up1_w, s.up1_b, 1));
  auto u2 = ops::concat_channels(g, {ops::upsample2_nearest(g, h1), f1});
  auto h2 = ops::relu(g, ops::conv2d(g, u2, s.up2_w, s.up2_b, 1));
  return ops::sigmoid(g, ops::conv2d(g, h2, s.head_w, s.head_b, 0));
}

template <typename T>
TensorPtr<T> loc_head_forward(Graph<T>& g, const LocHeadState<T>& s,
                              const TensorPtr<T>& f4) {
  const auto& cfg = s.config;
  if (f4->rank() != 4 || f4->dim(1) != cfg.level_channels[2])
    throw std::invalid_argument("loc_head_forward: expected f4 with " +
                                std::to_string(cfg.level_channels[2]) + " channels, got " +
                                shape_str(f4->shape));
  auto h = ops::relu(g, ops::conv2d(g, f4, s.conv_w, s.conv_b, 1));
  auto pooled = ops::global_avg_pool(g, h);
  return ops::sigmoid(g, ops::linear(g, pooled, s.fc_w, s.fc_b));
}

template <typename T>
NamedParams<T> named_params(const EncoderState<T>& s) {
  NamedParams<T> p;
  p.emplace_back("top.w", s.top_w);
  p.emplace_back("top.b", s.top_b);
  const DenseBlock<T>* blocks[3] = {&s.db1, &s.db2, &s.db3};
  for (int bi = 0; bi < 3; ++bi)
    for (size_t li = 0; li < blocks[bi]->w.size(); ++li) {
      const std::string base = "db" + std::to_string(bi + 1) + ".l" + std::to_string(li);
      p.emplace_back(base + ".w", blocks[bi]->w[li]);
      p.emplace_back(base + ".b", blocks[bi]->b[li]);
    }
  p.emplace_back("trans1.w", s.trans1_w);
  p.emplace_back("trans1.b", s.trans1_b);
  p.emplace_back("trans2.w", s.trans2_w);
  p.emplace_back("trans2.b", s.trans2_b);
  p.emplace_back("bottleneck.w", s.bottleneck_w);
  p.emplace_back("bottleneck.b", s.bottleneck_b);
  return p;
}

template <typename T>
NamedParams<T> named_params(const SegDecoderState<T>& s) {
  return {{"up1.w", s.up1_w},   {"up1.b", s.up1_b}, {"up2.w", s.up2_w},
          {"up2.b", s.up2_b},   {"head.w", s.head_w}, {"head.b", s.head_b}};
}

template <typename T>
NamedParams<T> named_params(const LocHeadState<T>& s) {
  return {{"conv.w", s.conv_w}, {"conv.b", s.conv_b}, {"fc.w", s.fc_w}, {"fc.b", s.fc_b}};
}

template <typename T>
std::vector<TensorPtr<T>> param_list(const NamedParams<T>& named) {
  std::vector<TensorPtr<T>> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

template <typename T>
int64_t count_parameters(const NamedParams<T>& named) {
  int64_t n = 0;
  for (const auto& [name, t] : named) n += t->size();
  return n;
}

#define ATTNET_INSTANTIATE(T)                                                             \
  template EncoderState<T> init_encoder<T>(const ModelConfig&, Rng&);                     \
  template SegDecoderState<T> init_seg_decoder<T>(const ModelConfig&, Rng&);              \
  template LocHeadState<T> init_loc_head<T>(const ModelConfig&, Rng&);                    \
  template EncoderOut<T> encoder_forward<T>(Graph<T>&, const EncoderState<T>&,            \
                                            const TensorPtr<T>&);                         \
  template TensorPtr<T> seg_decoder_forward<T>(Graph<T>&, const SegDecoderState<T>&,      \
                                               const TensorPtr<T>&, const TensorPtr<T>&,  \
                                               const TensorPtr<T>&);                      \
  template TensorPtr<T> loc_head_forward<T>(Graph<T>&, const LocHeadState<T>&,            \
                                            const TensorPtr<T>&);                         \
  template NamedParams<T> named_params<T>(const EncoderState<T>&);                        \
  template NamedParams<T> named_params<T>(const SegDecoderState<T>&);                     \
  template NamedParams<T> named_params<T>(const LocHeadState<T>&);                        \
  template std::vector<TensorPtr<T>> param_list<T>(const NamedParams<T>&);                \
  template int64_t count_parameters<T>(const NamedParams<T>&);

ATTNET_INSTANTIATE(float)
ATTNET_INSTANTIATE(double)
#undef ATTNET_INSTANTIATE

}  // namespace attnet::model
