#include "attnet/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "attnet/adam.hpp"
#include "attnet/losses.hpp"
#include "attnet/rng.hpp"

namespace attnet::train {

std::string mode_name(Mode m) { return m == Mode::tnet ? "tnet" : "baseline"; }

Mode mode_from_name(const std::string& s) {
  if (s == "tnet") return Mode::tnet;
  if (s == "baseline") return Mode::baseline;
  throw std::invalid_argument("unknown mode '" + s + "' (valid: tnet, baseline)");
}

std::string supervision_name(Supervision s) {
  switch (s) {
    case Supervision::shape: return "shape";
    case Supervision::contour: return "contour";
    case Supervision::center: return "center";
    case Supervision::none: return "none";
  }
  return "?";
}

Supervision supervision_from_name(const std::string& s) {
  if (s == "shape") return Supervision::shape;
  if (s == "contour") return Supervision::contour;
  if (s == "center") return Supervision::center;
  if (s == "none") return Supervision::none;
  throw std::invalid_argument("unknown supervision '" + s +
                              "' (valid: shape, contour, center, none)");
}

std::string task_name(Task t) {
  return t == Task::segmentation ? "segmentation" : "localization";
}

Task task_from_name(const std::string& s) {
  if (s == "segmentation") return Task::segmentation;
  if (s == "localization") return Task::localization;
  throw std::invalid_argument("unknown task '" + s +
                              "' (valid: segmentation, localization)");
}

void ExperimentSpec::validate() const {
  model.validate();
  if (mode == Mode::baseline && supervision != Supervision::none)
    throw std::invalid_argument("baseline mode trains without supervision maps; got --supervision " +
                                supervision_name(supervision));
  if (mode == Mode::tnet && supervision == Supervision::none)
    throw std::invalid_argument("tnet mode needs a supervision kind (shape, contour or center)");
  if (encoder_epochs < 0 || posterior_epochs < 0)
    throw std::invalid_argument("epoch counts must be >= 0");
  if (batch_size < 1)
    throw std::invalid_argument("batch_size must be >= 1, got " + std::to_string(batch_size));
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must be in (0,1), got " +
                                std::to_string(train_fraction));
}

namespace {

constexpr float kDiceEps = 1e-6f;

// Reserved PRNG stream ids for one run seed.
constexpr uint64_t kStreamEncoderInit = 0;
constexpr uint64_t kStreamPosteriorInit = 1;
constexpr uint64_t kStreamEncoderEpoch = 100;        // + epoch
constexpr uint64_t kStreamPosteriorEpoch = 100000;   // + epoch
constexpr uint64_t kStreamBaselineEpoch = 200000;    // + epoch

std::vector<int> shuffled_indices(int n, Rng rng) {
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  for (int j = n - 1; j >= 1; --j)
    std::swap(idx[static_cast<size_t>(j)],
              idx[static_cast<size_t>(rng.below(static_cast<uint64_t>(j) + 1))]);
  return idx;
}

TensorPtr<float> stack_images(const std::vector<synth::Sample>& v, const std::vector<int>& order,
                              int from, int B) {
  const int H = v[0].mask.height, W = v[0].mask.width;
  auto x = make_tensor<float>({B, 1, H, W});
  for (int b = 0; b < B; ++b) {
    const auto& img = v[static_cast<size_t>(order[static_cast<size_t>(from + b)])].image;
    std::copy(img->data.begin(), img->data.end(),
              x->ptr() + static_cast<int64_t>(b) * H * W);
  }
  return x;
}

// {B,N,Hm,Wm}: channel 0 carries the supervision map, the rest stay zero.
TensorPtr<float> encoder_targets(const TrainData& d, const std::vector<int>& order, int from,
                                 int B, int N) {
  const int Hm = d.train_maps[0]->dim(0), Wm = d.train_maps[0]->dim(1);
  auto t = make_tensor<float>({B, N, Hm, Wm});
  for (int b = 0; b < B; ++b) {
    const auto& m = d.train_maps[static_cast<size_t>(order[static_cast<size_t>(from + b)])];
    std::copy(m->data.begin(), m->data.end(),
              t->ptr() + static_cast<int64_t>(b) * N * Hm * Wm);
  }
  return t;
}

// {B,N,H,W}: channel 0 is the binary mask, the rest stay zero.
TensorPtr<float> seg_targets(const std::vector<synth::Sample>& v, const std::vector<int>& order,
                             int from, int B, int N) {
  const int H = v[0].mask.height, W = v[0].mask.width;
  auto t = make_tensor<float>({B, N, H, W});
  for (int b = 0; b < B; ++b) {
    const auto& m = v[static_cast<size_t>(order[static_cast<size_t>(from + b)])].mask;
    float* dst = t->ptr() + static_cast<int64_t>(b) * N * H * W;
    for (size_t i = 0; i < m.values.size(); ++i) dst[i] = m.values[i] ? 1.0f : 0.0f;
  }
  return t;
}

// {B,2}: centroid normalized to (0,1) by the image extents.
TensorPtr<float> loc_targets(const std::vector<synth::Sample>& v, const std::vector<int>& order,
                             int from, int B) {
  const double W = v[0].mask.width, H = v[0].mask.height;
  auto t = make_tensor<float>({B, 2});
  for (int b = 0; b < B; ++b) {
    const auto& s = v[static_cast<size_t>(order[static_cast<size_t>(from + b)])];
    t->data[static_cast<size_t>(2 * b)] = static_cast<float>(s.cx / W);
    t->data[static_cast<size_t>(2 * b + 1)] = static_cast<float>(s.cy / H);
  }
  return t;
}

std::vector<int> identity_order(int n) {
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  return idx;
}

struct FeatureCache {
  // Per sample, rank-3 {C,h,w} detached copies.
  std::vector<TensorPtr<float>> f1, f2, f4;
};

TensorPtr<float> slice_sample(const TensorPtr<float>& batch, int b) {
  const int C = batch->dim(1), h = batch->dim(2), w = batch->dim(3);
  auto t = make_tensor<float>({C, h, w});
  const int64_t n = static_cast<int64_t>(C) * h * w;
  std::copy_n(batch->ptr() + static_cast<int64_t>(b) * n, n, t->ptr());
  return t;
}

FeatureCache cache_features(const model::EncoderState<float>& enc,
                            const std::vector<synth::Sample>& samples, int batch_size) {
  FeatureCache cache;
  const int n = static_cast<int>(samples.size());
  const auto order = identity_order(n);
  for (int from = 0; from < n; from += batch_size) {
    const int B = std::min(batch_size, n - from);
    Graph<float> g;
    auto out = model::encoder_forward(g, enc, stack_images(samples, order, from, B));
    for (int b = 0; b < B; ++b) {
      cache.f1.push_back(slice_sample(out.f1, b));
      cache.f2.push_back(slice_sample(out.f2, b));
      cache.f4.push_back(slice_sample(out.f4, b));
    }
  }
  return cache;
}

TensorPtr<float> stack_cached(const std::vector<TensorPtr<float>>& per_sample,
                              const std::vector<int>& order, int from, int B) {
  const auto& s0 = per_sample[static_cast<size_t>(order[static_cast<size_t>(from)])];
  auto t = make_tensor<float>({B, s0->dim(0), s0->dim(1), s0->dim(2)});
  const int64_t n = s0->size();
  for (int b = 0; b < B; ++b)
    std::copy_n(per_sample[static_cast<size_t>(order[static_cast<size_t>(from + b)])]->ptr(), n,
                t->ptr() + static_cast<int64_t>(b) * n);
  return t;
}

bool finite_loss(const TensorPtr<float>& loss) { return std::isfinite(loss->data[0]); }

std::string abort_message(const char* stage, int epoch, int step, float value) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "non-finite %s loss %g at epoch %d step %d", stage,
                static_cast<double>(value), epoch, step);
  return buf;
}

attention::AttentionMap make_map(Supervision kind, const attention::Mask& mask, int factor,
                                 const attention::MapParams& params) {
  switch (kind) {
    case Supervision::shape: return attention::shape_map(mask, factor);
    case Supervision::contour: return attention::contour_map(mask, factor, params.sigma);
    case Supervision::center: return attention::center_map(mask, factor, params.metric);
    case Supervision::none: break;
  }
  throw std::invalid_argument("make_map: supervision 'none' has no attention map");
}

}  // namespace

TrainData prepare_data(const ExperimentSpec& spec, const std::vector<synth::Sample>& all,
                       uint64_t dataset_seed) {
  spec.validate();
  auto [ti, si] =
      synth::split_indices(static_cast<int>(all.size()), spec.train_fraction, dataset_seed);
  TrainData d;
  for (int i : ti) d.train.push_back(all[static_cast<size_t>(i)]);
  for (int i : si) d.test.push_back(all[static_cast<size_t>(i)]);
  if (spec.mode == Mode::tnet) {
    d.train_maps.reserve(d.train.size());
    for (const auto& s : d.train) {
      auto m = make_map(spec.supervision, s.mask, 4, spec.map_params);
      auto t = make_tensor<float>({m.height, m.width});
      std::copy(m.values.begin(), m.values.end(), t->ptr());
      d.train_maps.push_back(t);
    }
  }
  return d;
}

EncoderResult train_encoder(const ExperimentSpec& spec, const TrainData& data) {
  spec.validate();
  if (spec.mode != Mode::tnet)
    throw std::invalid_argument("train_encoder: supervision training requires tnet mode");
  if (data.train.empty()) throw std::invalid_argument("train_encoder: no training samples");
  if (data.train_maps.size() != data.train.size())
    throw std::invalid_argument("train_encoder: " + std::to_string(data.train.size()) +
                                " samples but " + std::to_string(data.train_maps.size()) +
                                " supervision maps");

  EncoderResult res;
  Rng init_rng = substream(spec.seed, kStreamEncoderInit);
  res.state = model::init_encoder<float>(spec.model, init_rng);
  Adam<float> opt(model::param_list(model::named_params(res.state)),
                  AdamConfig<float>{.lr = static_cast<float>(spec.lr)});

  const int n = static_cast<int>(data.train.size());
  const int N = spec.model.bottleneck_channels;
  for (int epoch = 0; epoch < spec.encoder_epochs; ++epoch) {
    const auto order = shuffled_indices(n, substream(spec.seed, kStreamEncoderEpoch + epoch));
    double epoch_loss = 0.0;
    int batches = 0;
    for (int from = 0; from < n; from += spec.batch_size) {
      const int B = std::min(spec.batch_size, n - from);
      Graph<float> g;
      auto out = model::encoder_forward(g, res.state, stack_images(data.train, order, from, B));
      auto loss = losses::dice_loss(g, out.supervision,
                                    encoder_targets(data, order, from, B, N), kDiceEps);
      if (!finite_loss(loss)) {
        res.aborted = true;
        res.abort_reason = abort_message("encoder", epoch, batches, loss->data[0]);
        return res;
      }
      opt.zero_grad();
      g.backward(loss);
      opt.step();
      epoch_loss += loss->data[0];
      ++batches;
    }
    res.loss_curve.push_back(epoch_loss / batches);
  }
  return res;
}

double supervision_fit_loss(const model::EncoderState<float>& encoder, const TrainData& data,
                            int batch_size) {
  if (data.train_maps.size() != data.train.size())
    throw std::invalid_argument("supervision_fit_loss: " + std::to_string(data.train.size()) +
                                " samples but " + std::to_string(data.train_maps.size()) +
                                " supervision maps");
  const int n = static_cast<int>(data.train.size());
  const auto order = identity_order(n);
  double dice_sum = 0.0;
  for (int from = 0; from < n; from += batch_size) {
    const int B = std::min(batch_size, n - from);
    Graph<float> g;
    auto out = model::encoder_forward(g, encoder, stack_images(data.train, order, from, B));
    const int N = out.supervision->dim(1);
    const int64_t plane =
        static_cast<int64_t>(out.supervision->dim(2)) * out.supervision->dim(3);
    for (int b = 0; b < B; ++b) {
      const float* p = out.supervision->ptr() + (static_cast<int64_t>(b) * N) * plane;
      const float* t = data.train_maps[static_cast<size_t>(from + b)]->ptr();
      double pg = 0.0, pp = 0.0, gg = 0.0;
      for (int64_t i = 0; i < plane; ++i) {
        pg += double(p[i]) * t[i];
        pp += double(p[i]) * p[i];
        gg += double(t[i]) * t[i];
      }
      dice_sum += 2.0 * pg / (pp + gg + double(kDiceEps));
    }
  }
  return 1.0 - dice_sum / n;
}

PosteriorResult train_posterior(const ExperimentSpec& spec,
                                const model::EncoderState<float>& encoder,
                                const TrainData& data) {
  spec.validate();
  if (data.train.empty()) throw std::invalid_argument("train_posterior: no training samples");

  PosteriorResult res;
  Rng init_rng = substream(spec.seed, kStreamPosteriorInit);
  if (spec.task == Task::segmentation)
    res.seg = model::init_seg_decoder<float>(spec.model, init_rng);
  else
    res.loc = model::init_loc_head<float>(spec.model, init_rng);
  auto params = spec.task == Task::segmentation
                    ? model::param_list(model::named_params(*res.seg))
                    : model::param_list(model::named_params(*res.loc));
  Adam<float> opt(params, AdamConfig<float>{.lr = static_cast<float>(spec.lr)});

  // The encoder never enters the posterior graph: its features are computed
  // once here and reused, which both freezes it exactly and avoids paying
  // for the encoder forward every step.
  const FeatureCache cache = cache_features(encoder, data.train, spec.batch_size);

  const int n = static_cast<int>(data.train.size());
  const int N = spec.model.bottleneck_channels;
  for (int epoch = 0; epoch < spec.posterior_epochs; ++epoch) {
    const auto order = shuffled_indices(n, substream(spec.seed, kStreamPosteriorEpoch + epoch));
    double epoch_loss = 0.0;
    int batches = 0;
    for (int from = 0; from < n; from += spec.batch_size) {
      const int B = std::min(spec.batch_size, n - from);
      Graph<float> g;
      TensorPtr<float> loss;
      if (spec.task == Task::segmentation) {
        auto out = model::seg_decoder_forward(g, *res.seg, stack_cached(cache.f1, order, from, B),
                                              stack_cached(cache.f2, order, from, B),
                                              stack_cached(cache.f4, order, from, B));
        loss = losses::dice_loss(g, out, seg_targets(data.train, order, from, B, N), kDiceEps);
      } else {
        auto out = model::loc_head_forward(g, *res.loc, stack_cached(cache.f4, order, from, B));
        loss = losses::loc_loss(g, out, loc_targets(data.train, order, from, B));
      }
      if (!finite_loss(loss)) {
        res.aborted = true;
        res.abort_reason = abort_message("posterior", epoch, batches, loss->data[0]);
        return res;
      }
      opt.zero_grad();
      g.backward(loss);
      opt.step();
      epoch_loss += loss->data[0];
      ++batches;
    }
    res.loss_curve.push_back(epoch_loss / batches);
  }
  return res;
}

BaselineResult train_baseline(const ExperimentSpec& spec, const TrainData& data) {
  spec.validate();
  if (spec.mode != Mode::baseline)
    throw std::invalid_argument("train_baseline: requires baseline mode");
  if (data.train.empty()) throw std::invalid_argument("train_baseline: no training samples");

  BaselineResult res;
  Rng enc_rng = substream(spec.seed, kStreamEncoderInit);
  res.encoder = model::init_encoder<float>(spec.model, enc_rng);
  Rng post_rng = substream(spec.seed, kStreamPosteriorInit);
  if (spec.task == Task::segmentation)
    res.posterior.seg = model::init_seg_decoder<float>(spec.model, post_rng);
  else
    res.posterior.loc = model::init_loc_head<float>(spec.model, post_rng);

  auto params = model::param_list(model::named_params(res.encoder));
  auto head = spec.task == Task::segmentation
                  ? model::param_list(model::named_params(*res.posterior.seg))
                  : model::param_list(model::named_params(*res.posterior.loc));
  params.insert(params.end(), head.begin(), head.end());
  Adam<float> opt(params, AdamConfig<float>{.lr = static_cast<float>(spec.lr)});

  const int n = static_cast<int>(data.train.size());
  const int N = spec.model.bottleneck_channels;
  const int epochs = spec.encoder_epochs + spec.posterior_epochs;  // same step budget
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = shuffled_indices(n, substream(spec.seed, kStreamBaselineEpoch + epoch));
    double epoch_loss = 0.0;
    int batches = 0;
    for (int from = 0; from < n; from += spec.batch_size) {
      const int B = std::min(spec.batch_size, n - from);
      Graph<float> g;
      auto enc_out =
          model::encoder_forward(g, res.encoder, stack_images(data.train, order, from, B));
      TensorPtr<float> loss;
      if (spec.task == Task::segmentation) {
        auto out = model::seg_decoder_forward(g, *res.posterior.seg, enc_out.f1, enc_out.f2,
                                              enc_out.f4);
        loss = losses::dice_loss(g, out, seg_targets(data.train, order, from, B, N), kDiceEps);
      } else {
        auto out = model::loc_head_forward(g, *res.posterior.loc, enc_out.f4);
        loss = losses::loc_loss(g, out, loc_targets(data.train, order, from, B));
      }
      if (!finite_loss(loss)) {
        res.posterior.aborted = true;
        res.posterior.abort_reason = abort_message("joint", epoch, batches, loss->data[0]);
        return res;
      }
      opt.zero_grad();
      g.backward(loss);
      opt.step();
      epoch_loss += loss->data[0];
      ++batches;
    }
    res.posterior.loss_curve.push_back(epoch_loss / batches);
  }
  return res;
}

metrics::EvalReport evaluate(const model::EncoderState<float>& encoder,
                             const std::optional<model::SegDecoderState<float>>& seg,
                             const std::optional<model::LocHeadState<float>>& loc, Task task,
                             const std::vector<synth::Sample>& samples, int batch_size,
                             std::vector<std::string>* warnings) {
  if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
  if (task == Task::segmentation && !seg)
    throw std::invalid_argument("evaluate: segmentation task without a decoder");
  if (task == Task::localization && !loc)
    throw std::invalid_argument("evaluate: localization task without a localization head");

  const int n = static_cast<int>(samples.size());
  const int W = samples[0].mask.width, H = samples[0].mask.height;
  const auto order = identity_order(n);
  double dice_sum = 0.0, hd_sum = 0.0, ed_sum = 0.0;
  int empty_preds = 0;

  for (int from = 0; from < n; from += batch_size) {
    const int B = std::min(batch_size, n - from);
    Graph<float> g;
    auto enc_out = model::encoder_forward(g, encoder, stack_images(samples, order, from, B));
    if (task == Task::segmentation) {
      auto out = model::seg_decoder_forward(g, *seg, enc_out.f1, enc_out.f2, enc_out.f4);
      for (int b = 0; b < B; ++b) {
        attention::Mask pm(W, H);
        const float* ch0 = out->ptr() + static_cast<int64_t>(b) * out->dim(1) * H * W;
        for (int64_t i = 0; i < static_cast<int64_t>(H) * W; ++i)
          pm.values[static_cast<size_t>(i)] = ch0[i] >= 0.5f ? 1 : 0;
        const auto& gt = samples[static_cast<size_t>(from + b)].mask;
        dice_sum += metrics::dice_score(pm, gt);
        if (pm.foreground_count() == 0) {
          hd_sum += std::hypot(static_cast<double>(W), static_cast<double>(H));
          ++empty_preds;
        } else {
          hd_sum += metrics::hausdorff95(pm, gt);
        }
      }
    } else {
      auto out = model::loc_head_forward(g, *loc, enc_out.f4);
      for (int b = 0; b < B; ++b) {
        const auto& s = samples[static_cast<size_t>(from + b)];
        ed_sum += metrics::euclidean_distance(out->data[static_cast<size_t>(2 * b)] * W,
                                              out->data[static_cast<size_t>(2 * b + 1)] * H,
                                              s.cx, s.cy);
      }
    }
  }

  metrics::EvalReport rep;
  rep.n = n;
  if (task == Task::segmentation) {
    rep.dice = {dice_sum / n};
    rep.hausdorff95 = {hd_sum / n};
    rep.recompute_s();
    if (empty_preds > 0 && warnings)
      warnings->push_back(std::to_string(empty_preds) +
                          " samples predicted an empty mask; the image diagonal stood in for "
                          "their Hausdorff distance");
  } else {
    rep.ed = ed_sum / n;
  }
  return rep;
}

namespace {

void trend_warning(const std::vector<double>& curve, const char* stage,
                   std::vector<std::string>& out) {
  if (curve.size() < 2) return;
  auto ma = [&](size_t i) {
    const size_t lo = i >= 9 ? i - 9 : 0;
    double s = 0.0;
    for (size_t j = lo; j <= i; ++j) s += curve[j];
    return s / static_cast<double>(i - lo + 1);
  };
  for (size_t i = 1; i < curve.size(); ++i) {
    if (ma(i) > ma(i - 1) + 1e-12) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "%s loss 10-epoch moving average increased at epoch %zu (%.6f > %.6f)",
                    stage, i, ma(i), ma(i - 1));
      out.push_back(buf);
      return;  // one warning per stage is enough
    }
  }
}

nlohmann::json spec_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["mode"] = mode_name(s.mode);
  j["supervision"] = supervision_name(s.supervision);
  j["task"] = task_name(s.task);
  j["encoder_epochs"] = s.encoder_epochs;
  j["posterior_epochs"] = s.posterior_epochs;
  j["batch_size"] = s.batch_size;
  j["lr"] = s.lr;
  j["seed"] = s.seed;
  j["train_fraction"] = s.train_fraction;
  j["dataset"] = s.dataset;
  j["model"]["growth_rate"] = s.model.growth_rate;
  j["model"]["bottleneck_channels"] = s.model.bottleneck_channels;
  j["model"]["level_channels"] = s.model.level_channels;
  j["model"]["layers_per_block"] = s.model.layers_per_block;
  j["model"]["input_channels"] = s.model.input_channels;
  j["map_sigma"] = s.map_params.sigma;
  j["map_metric"] = attention::metric_name(s.map_params.metric);
  return j;
}

ExperimentSpec spec_from(const nlohmann::json& j) {
  ExperimentSpec s;
  s.mode = mode_from_name(j.at("mode").get<std::string>());
  s.supervision = supervision_from_name(j.at("supervision").get<std::string>());
  s.task = task_from_name(j.at("task").get<std::string>());
  s.encoder_epochs = j.at("encoder_epochs").get<int>();
  s.posterior_epochs = j.at("posterior_epochs").get<int>();
  s.batch_size = j.at("batch_size").get<int>();
  s.lr = j.at("lr").get<double>();
  s.seed = j.at("seed").get<uint64_t>();
  s.train_fraction = j.at("train_fraction").get<double>();
  s.dataset = j.at("dataset").get<std::string>();
  const auto& m = j.at("model");
  s.model.growth_rate = m.at("growth_rate").get<int>();
  s.model.bottleneck_channels = m.at("bottleneck_channels").get<int>();
  const auto lv = m.at("level_channels").get<std::vector<int>>();
  std::copy(lv.begin(), lv.end(), s.model.level_channels.begin());
  s.model.layers_per_block = m.at("layers_per_block").get<int>();
  s.model.input_channels = m.at("input_channels").get<int>();
  s.map_params.sigma = j.at("map_sigma").get<double>();
  s.map_params.metric = attention::metric_from_name(j.at("map_metric").get<std::string>());
  return s;
}

nlohmann::json report_json(const metrics::EvalReport& r) {
  nlohmann::json j;
  j["dice"] = r.dice;
  j["hausdorff95"] = r.hausdorff95;
  j["s"] = r.s;
  j["ed"] = r.ed;
  j["n"] = r.n;
  return j;
}

metrics::EvalReport report_from(const nlohmann::json& j) {
  metrics::EvalReport r;
  r.dice = j.at("dice").get<std::vector<double>>();
  r.hausdorff95 = j.at("hausdorff95").get<std::vector<double>>();
  r.s = j.at("s").get<double>();
  r.ed = j.at("ed").get<double>();
  r.n = j.at("n").get<int64_t>();
  return r;
}

}  // namespace

std::string RunRecord::to_json_line() const {
  nlohmann::json j;
  j["spec"] = spec_json(spec);
  j["encoder_loss"] = encoder_loss;
  j["posterior_loss"] = posterior_loss;
  j["train_report"] = report_json(train_report);
  j["test_report"] = report_json(test_report);
  j["warnings"] = warnings;
  j["aborted"] = aborted;
  j["abort_reason"] = abort_reason;
  j["wall_seconds"] = wall_seconds;
  return j.dump();
}

RunRecord RunRecord::from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  RunRecord r;
  r.spec = spec_from(j.at("spec"));
  r.encoder_loss = j.at("encoder_loss").get<std::vector<double>>();
  r.posterior_loss = j.at("posterior_loss").get<std::vector<double>>();
  r.train_report = report_from(j.at("train_report"));
  r.test_report = report_from(j.at("test_report"));
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.aborted = j.at("aborted").get<bool>();
  r.abort_reason = j.at("abort_reason").get<std::string>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

std::string RunRecord::cell_key() const { return spec_json(spec).dump(); }

RunOutput run_experiment(const ExperimentSpec& spec, const TrainData& data) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  out.record.spec = spec;

  if (spec.mode == Mode::tnet) {
    auto enc = train_encoder(spec, data);
    out.encoder = std::move(enc.state);
    out.record.encoder_loss = std::move(enc.loss_curve);
    if (enc.aborted) {
      out.record.aborted = true;
      out.record.abort_reason = enc.abort_reason;
    } else {
      auto post = train_posterior(spec, out.encoder, data);
      out.seg = std::move(post.seg);
      out.loc = std::move(post.loc);
      out.record.posterior_loss = std::move(post.loss_curve);
      if (post.aborted) {
        out.record.aborted = true;
        out.record.abort_reason = post.abort_reason;
      }
    }
  } else {
    auto base = train_baseline(spec, data);
    out.encoder = std::move(base.encoder);
    out.seg = std::move(base.posterior.seg);
    out.loc = std::move(base.posterior.loc);
    out.record.posterior_loss = std::move(base.posterior.loss_curve);
    if (base.posterior.aborted) {
      out.record.aborted = true;
      out.record.abort_reason = base.posterior.abort_reason;
    }
  }

  if (!out.record.aborted) {
    out.record.train_report = evaluate(out.encoder, out.seg, out.loc, spec.task, data.train,
                                       spec.batch_size, &out.record.warnings);
    out.record.test_report = evaluate(out.encoder, out.seg, out.loc, spec.task, data.test,
                                      spec.batch_size, &out.record.warnings);
    trend_warning(out.record.encoder_loss, "encoder", out.record.warnings);
    trend_warning(out.record.posterior_loss,
                  spec.mode == Mode::baseline ? "joint" : "posterior", out.record.warnings);
  }

  out.record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::vector<RunRecord> run_ablation(
    const std::vector<ExperimentSpec>& grid,
    const std::function<TrainData(const ExperimentSpec&)>& data_for,
    const AblationOptions& options) {
  std::unordered_map<std::string, RunRecord> done;
  if (options.resume && !options.runs_path.empty() &&
      std::filesystem::exists(options.runs_path)) {
    std::ifstream in(options.runs_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto r = RunRecord::from_json_line(line);
      if (!r.aborted) done.emplace(r.cell_key(), std::move(r));
    }
  }

  std::ofstream append;
  if (!options.runs_path.empty()) {
    append.open(options.runs_path, std::ios::app);
    if (!append) throw std::runtime_error("cannot open for appending: " + options.runs_path);
  }

  std::vector<RunRecord> records;
  for (const auto& spec : grid) {
    RunRecord rec;
    rec.spec = spec;
    const auto it = done.find(rec.cell_key());
    if (it != done.end()) {
      records.push_back(it->second);
      continue;
    }
    try {
      rec = run_experiment(spec, data_for(spec)).record;
    } catch (const std::exception& e) {
      rec.aborted = true;
      rec.abort_reason = e.what();
    }
    if (append.is_open()) {
      append << rec.to_json_line() << "\n";
      append.flush();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

std::string row_label(Supervision s) {
  switch (s) {
    case Supervision::none: return "-";
    case Supervision::shape: return "Shape-Aware";
    case Supervision::contour: return "Contour-Aware";
    case Supervision::center: return "Center-Aware";
  }
  return "?";
}

const RunRecord* find_cell(const std::vector<RunRecord>& records, Supervision s, Task t) {
  const RunRecord* hit = nullptr;
  for (const auto& r : records)
    if (r.spec.supervision == s && r.spec.task == t) hit = &r;  // last one wins
  return hit;
}

}  // namespace

std::string ablation_table(const std::vector<RunRecord>& records) {
  bool has_seg = false, has_loc = false;
  for (const auto& r : records) {
    has_seg = has_seg || r.spec.task == Task::segmentation;
    has_loc = has_loc || r.spec.task == Task::localization;
  }
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s", "Supervision");
  out += buf;
  if (has_seg) {
    std::snprintf(buf, sizeof buf, "%12s", "Seg Dice");
    out += buf;
  }
  if (has_loc) {
    std::snprintf(buf, sizeof buf, "%12s", "Loc ED(px)");
    out += buf;
  }
  out += "\n";
  for (Supervision s : {Supervision::none, Supervision::shape, Supervision::contour,
                        Supervision::center}) {
    const RunRecord* seg_cell = has_seg ? find_cell(records, s, Task::segmentation) : nullptr;
    const RunRecord* loc_cell = has_loc ? find_cell(records, s, Task::localization) : nullptr;
    if (!seg_cell && !loc_cell) continue;
    std::snprintf(buf, sizeof buf, "%-16s", row_label(s).c_str());
    out += buf;
    if (has_seg) {
      if (!seg_cell)
        std::snprintf(buf, sizeof buf, "%12s", "-");
      else if (seg_cell->aborted)
        std::snprintf(buf, sizeof buf, "%12s", "failed");
      else
        std::snprintf(buf, sizeof buf, "%12.4f", seg_cell->test_report.dice[0]);
      out += buf;
    }
    if (has_loc) {
      if (!loc_cell)
        std::snprintf(buf, sizeof buf, "%12s", "-");
      else if (loc_cell->aborted)
        std::snprintf(buf, sizeof buf, "%12s", "failed");
      else
        std::snprintf(buf, sizeof buf, "%12.2f", loc_cell->test_report.ed);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::string ablation_csv(const std::vector<RunRecord>& records) {
  std::string out = "supervision,task,dice,hausdorff95,ed,s,aborted\n";
  char buf[240];
  for (const auto& r : records) {
    const auto& rep = r.test_report;
    std::string dice = rep.dice.empty() ? "" : (std::snprintf(buf, sizeof buf, "%.6f", rep.dice[0]), buf);
    std::string hd =
        rep.hausdorff95.empty() ? "" : (std::snprintf(buf, sizeof buf, "%.6f", rep.hausdorff95[0]), buf);
    char row[320];
    std::snprintf(row, sizeof row, "%s,%s,%s,%s,%.6f,%.6f,%d\n",
                  supervision_name(r.spec.supervision).c_str(), task_name(r.spec.task).c_str(),
                  dice.c_str(), hd.c_str(), rep.ed, rep.s, r.aborted ? 1 : 0);
    out += row;
  }
  return out;
}

}  // namespace attnet::train
