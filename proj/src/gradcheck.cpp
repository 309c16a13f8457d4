#include "attnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "attnet/losses.hpp"
#include "attnet/model.hpp"
#include "attnet/ops.hpp"

namespace attnet::gradcheck {

namespace {

std::vector<int64_t> pick_coords(int64_t n, int cap, Rng* rng) {
  if (cap <= 0 || n <= cap) {
    std::vector<int64_t> all(static_cast<size_t>(n));
    std::iota(all.begin(), all.end(), int64_t{0});
    return all;
  }
  // Strided subsample with a random phase: spread out, no duplicates.
  std::vector<int64_t> picked;
  picked.reserve(static_cast<size_t>(cap));
  const int64_t stride = n / cap;
  const int64_t phase = rng ? static_cast<int64_t>(rng->below(static_cast<uint64_t>(stride)))
                            : 0;
  for (int c = 0; c < cap; ++c) picked.push_back(phase + stride * c);
  return picked;
}

double eval_loss(const ScalarFn& fn, const std::vector<TensorPtr<double>>& inputs) {
  Graph<double> g;
  auto loss = fn(g, inputs);
  if (!loss->is_scalar())
    throw std::invalid_argument("gradcheck: fn must return a scalar, got shape " +
                                shape_str(loss->shape));
  return loss->data[0];
}

}  // namespace

CheckResult check_scalar_fn(const std::string& name, const ScalarFn& fn,
                            const std::vector<TensorPtr<double>>& inputs,
                            const CheckConfig& cfg, Rng* coord_rng) {
  CheckResult res;
  res.name = name;

  for (const auto& t : inputs) {
    t->set_requires_grad(true);
    t->zero_grad();
  }
  {
    Graph<double> g;
    auto loss = fn(g, inputs);
    if (!loss->is_scalar())
      throw std::invalid_argument("gradcheck: fn must return a scalar, got shape " +
                                  shape_str(loss->shape));
    g.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& t : inputs) analytic.push_back(t->grad);

  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& x = inputs[ti]->data;
    for (int64_t i : pick_coords(static_cast<int64_t>(x.size()), cfg.max_coords_per_tensor,
                                 coord_rng)) {
      const double x0 = x[static_cast<size_t>(i)];
      const double h = cfg.step * std::max(1.0, std::abs(x0));
      x[static_cast<size_t>(i)] = x0 + h;
      const double up = eval_loss(fn, inputs);
      x[static_cast<size_t>(i)] = x0 - h;
      const double down = eval_loss(fn, inputs);
      x[static_cast<size_t>(i)] = x0;

      const double fd = (up - down) / (2.0 * h);
      const double a = analytic[ti][static_cast<size_t>(i)];
      const double abs_err = std::abs(a - fd);
      const double scale = std::max({std::abs(a), std::abs(fd), cfg.abs_floor});
      res.max_abs_err = std::max(res.max_abs_err, abs_err);
      res.max_rel_err = std::max(res.max_rel_err, abs_err / scale);
      ++res.coords_checked;
      if (abs_err > std::max(cfg.abs_floor, cfg.rel_tol * std::max(std::abs(a), std::abs(fd)))) {
        res.pass = false;
        if (res.first_failure.empty()) {
          char buf[200];
          std::snprintf(buf, sizeof buf,
                        "input %zu coord %lld: analytic=%.9g fd=%.9g (|diff|=%.3g)", ti,
                        static_cast<long long>(i), a, fd, abs_err);
          res.first_failure = buf;
        }
      }
    }
  }
  return res;
}

namespace {

TensorPtr<double> randn(Rng& rng, std::vector<int> shape) {
  auto t = make_tensor<double>(std::move(shape));
  for (auto& v : t->data) v = rng.gauss();
  return t;
}

TensorPtr<double> rand01(Rng& rng, std::vector<int> shape) {
  auto t = make_tensor<double>(std::move(shape));
  for (auto& v : t->data) v = rng.uniform();
  return t;
}

// Distinct values keep every pooling window tie-free: a finite-difference
// step must never flip an argmax.
TensorPtr<double> distinct_grid(Rng& rng, std::vector<int> shape) {
  auto t = make_tensor<double>(std::move(shape));
  const int64_t n = t->size();
  for (int64_t i = 0; i < n; ++i) t->data[static_cast<size_t>(i)] = 0.01 * static_cast<double>(i);
  for (int64_t j = n - 1; j >= 1; --j)
    std::swap(t->data[static_cast<size_t>(j)],
              t->data[static_cast<size_t>(rng.below(static_cast<uint64_t>(j) + 1))]);
  return t;
}

// Pushed away from zero so no finite difference straddles the relu kink.
TensorPtr<double> randn_off_zero(Rng& rng, std::vector<int> shape, double gap) {
  auto t = randn(rng, std::move(shape));
  for (auto& v : t->data) v += v >= 0.0 ? gap : -gap;
  return t;
}

// Reduce an arbitrary op output to a scalar with fixed random weights, so the
// check exercises every output coordinate's gradient path at once.
TensorPtr<double> weighted_sum(Graph<double>& g, const TensorPtr<double>& out,
                               const TensorPtr<double>& w) {
  return ops::sum(g, ops::mul(g, out, w));
}

}  // namespace

SuiteResult run_builtin_suite(uint64_t seed, const CheckConfig& cfg) {
  SuiteResult suite;
  Rng rng = substream(seed, 0x6c);
  auto add = [&](CheckResult r) {
    suite.all_pass = suite.all_pass && r.pass;
    suite.results.push_back(std::move(r));
  };

  {
    auto w_out = randn(rng, {2, 4, 6, 5});
    add(check_scalar_fn(
        "conv2d_3x3",
        [w_out](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
          return weighted_sum(g, ops::conv2d(g, in[0], in[1], in[2], 1), w_out);
        },
        {randn(rng, {2, 3, 6, 5}), randn(rng, {4, 3, 3, 3}), randn(rng, {4})}, cfg, &rng));
  }
  {
    auto w_out = randn(rng, {2, 2, 4, 3});
    add(check_scalar_fn(
        "conv2d_1x1",
        [w_out](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
          return weighted_sum(g, ops::conv2d(g, in[0], in[1], in[2], 0), w_out);
        },
        {randn(rng, {2, 3, 4, 3}), randn(rng, {2, 3, 1, 1}), randn(rng, {2})}, cfg, &rng));
  }
  {
    auto w_out = randn(rng, {2, 3, 2, 3});
    add(check_scalar_fn(
        "maxpool2",
        [w_out](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
          return weighted_sum(g, ops::maxpool2(g, in[0]), w_out);
        },
        {distinct_grid(rng, {2, 3, 4, 6})}, cfg, &rng));
  }
  {
    auto w_out = randn(rng, {2, 3, 6, 8});
    add(check_scalar_fn(
        "upsample2_nearest",
        [w_out](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
          return weighted_sum(g, ops::upsample2_nearest(g, in[0]), w_out);
        },
        {randn(rng, {2, 3, 3, 4})}, cfg, &rng));
  }
  {
    auto w_out = randn(rng, {2, 3, 4, 4});
    add(check_scalar_fn(
        "relu",
        [w_out](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
          return weighted_sum(g, ops::relu(g, in[0]), w_out);
        },
        {randn_off_zero(rng, {2, 3, 4, 4}, 0.05)}, cfg, &rng));
  }
  {
    auto w_out = randn(rng, {2, 3, 4, 4});
    add(check_scalar_fn(
        "sigmoid",
        [w_out](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
          return weighted_sum(g, ops::sigmoid(g, in[0]), w_out);
        },
        {randn(rng, {2, 3, 4, 4})}, cfg, &rng));
  }
  {
    auto w_out = randn(rng, {3, 4});
    add(check_scalar_fn(
        "linear",
        [w_out](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
          return weighted_sum(g, ops::linear(g, in[0], in[1], in[2]), w_out);
        },
        {randn(rng, {3, 5}), randn(rng, {4, 5}), randn(rng, {4})}, cfg, &rng));
  }
  {
    auto w_out = randn(rng, {2, 3});
    add(check_scalar_fn(
        "global_avg_pool",
        [w_out](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
          return weighted_sum(g, ops::global_avg_pool(g, in[0]), w_out);
        },
        {randn(rng, {2, 3, 4, 4})}, cfg, &rng));
  }
  {
    auto w_out = randn(rng, {2, 5, 3, 3});
    add(check_scalar_fn(
        "concat_channels",
        [w_out](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
          return weighted_sum(g, ops::concat_channels(g, {in[0], in[1]}), w_out);
        },
        {randn(rng, {2, 2, 3, 3}), randn(rng, {2, 3, 3, 3})}, cfg, &rng));
  }
  {
    auto w_out = randn(rng, {3, 4});
    add(check_scalar_fn(
        "add_mul_scale",
        [w_out](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
          return weighted_sum(g, ops::scale(g, ops::mul(g, ops::add(g, in[0], in[1]), in[2]), 1.7),
                              w_out);
        },
        {randn(rng, {3, 4}), randn(rng, {3, 4}), randn(rng, {3, 4})}, cfg, &rng));
  }
  add(check_scalar_fn(
      "mean",
      [](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
        return ops::mean(g, in[0]);
      },
      {randn(rng, {4, 5})}, cfg, &rng));
  add(check_scalar_fn(
      "dice_loss",
      [](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
        return losses::dice_loss(g, in[0], in[1], 1e-6);
      },
      {rand01(rng, {2, 3, 4, 4}), rand01(rng, {2, 3, 4, 4})}, cfg, &rng));
  add(check_scalar_fn(
      "loc_loss",
      [](Graph<double>& g, const std::vector<TensorPtr<double>>& in) {
        return losses::loc_loss(g, in[0], in[1]);
      },
      {rand01(rng, {3, 2}), rand01(rng, {3, 2})}, cfg, &rng));

  return suite;
}

SuiteResult run_model_suite(uint64_t seed, const CheckConfig& in_cfg) {
  // A wide stencil through the pooling layers straddles argmax flips and
  // reports garbage where the analytic gradient is in fact right (verified
  // by h-sweeps: the difference converges to the analytic value as h
  // shrinks). Cap the step well below the per-op default; double precision
  // keeps the roundoff floor near 1e-10 at h = 1e-6.
  CheckConfig cfg = in_cfg;
  cfg.step = std::min(cfg.step, 1e-6);

  SuiteResult suite;
  model::ModelConfig mc;
  mc.growth_rate = 2;
  mc.bottleneck_channels = 2;
  mc.layers_per_block = 4;
  mc.level_channels = {4, 6, 14};
  mc.input_channels = 1;
  mc.validate();

  Rng rng = substream(seed, 0x6d);
  auto enc = model::init_encoder<double>(mc, rng);
  auto dec = model::init_seg_decoder<double>(mc, rng);
  auto loc = model::init_loc_head<double>(mc, rng);
  auto x = rand01(rng, {1, 1, 16, 16});
  auto sup_target = rand01(rng, {1, 2, 4, 4});
  auto seg_target = rand01(rng, {1, 2, 16, 16});
  auto loc_target = rand01(rng, {1, 2});

  auto enc_params = model::param_list(model::named_params(enc));
  auto dec_params = model::param_list(model::named_params(dec));
  auto loc_params = model::param_list(model::named_params(loc));
  auto add = [&](CheckResult r) {
    suite.all_pass = suite.all_pass && r.pass;
    suite.results.push_back(std::move(r));
  };

  {
    auto leaves = enc_params;
    leaves.push_back(x);
    add(check_scalar_fn(
        "encoder_dice_16x16",
        [&enc, &x, &sup_target](Graph<double>& g, const std::vector<TensorPtr<double>>&) {
          auto out = model::encoder_forward(g, enc, x);
          return losses::dice_loss(g, out.supervision, sup_target, 1e-6);
        },
        leaves, cfg, &rng));
  }
  {
    auto leaves = enc_params;
    leaves.insert(leaves.end(), dec_params.begin(), dec_params.end());
    leaves.push_back(x);
    add(check_scalar_fn(
        "encoder_decoder_dice_16x16",
        [&enc, &dec, &x, &seg_target](Graph<double>& g, const std::vector<TensorPtr<double>>&) {
          auto f = model::encoder_forward(g, enc, x);
          auto out = model::seg_decoder_forward(g, dec, f.f1, f.f2, f.f4);
          return losses::dice_loss(g, out, seg_target, 1e-6);
        },
        leaves, cfg, &rng));
  }
  {
    auto leaves = enc_params;
    leaves.insert(leaves.end(), loc_params.begin(), loc_params.end());
    leaves.push_back(x);
    add(check_scalar_fn(
        "encoder_loc_16x16",
        [&enc, &loc, &x, &loc_target](Graph<double>& g, const std::vector<TensorPtr<double>>&) {
          auto f = model::encoder_forward(g, enc, x);
          auto out = model::loc_head_forward(g, loc, f.f4);
          return losses::loc_loss(g, out, loc_target);
        },
        leaves, cfg, &rng));
  }
  return suite;
}

std::string format_results(const SuiteResult& suite) {
  std::string out;
  char buf[240];
  std::snprintf(buf, sizeof buf, "%-20s %6s %12s %12s %8s\n", "op", "coords", "max_rel",
                "max_abs", "status");
  out += buf;
  for (const auto& r : suite.results) {
    std::snprintf(buf, sizeof buf, "%-20s %6lld %12.3e %12.3e %8s\n", r.name.c_str(),
                  static_cast<long long>(r.coords_checked), r.max_rel_err, r.max_abs_err,
                  r.pass ? "ok" : "FAIL");
    out += buf;
    if (!r.pass) {
      out += "    ";
      out += r.first_failure;
      out += "\n";
    }
  }
  out += suite.all_pass ? "all gradients consistent\n" : "GRADIENT MISMATCH\n";
  return out;
}

}  // namespace attnet::gradcheck
