#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "attnet/adam.hpp"
#include "attnet/kernels.hpp"
#include "attnet/ops.hpp"
#include "attnet/reference.hpp"
#include "attnet/rng.hpp"
#include "attnet/tensor.hpp"

using namespace attnet;

namespace {

// Independent xoshiro256** transcription (Blackman & Vigna's public domain
// reference), used as an oracle for the Rng stream.
struct XoRef {
  uint64_t s[4];
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t next() {
    const uint64_t result = rotl(s[1] * 5, 7) * 9;
    const uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
};

TensorPtr<float> randu(Rng& rng, Shape shape, bool rg = false) {
  auto t = make_tensor<float>(std::move(shape), rg);
  for (auto& v : t->data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

}  // namespace

TEST_CASE("shape helpers") {
  CHECK(numel({2, 3, 4}) == 24);
  CHECK(numel({}) == 1);
  CHECK(shape_str({2, 3}) == "(2,3)");
}

TEST_CASE("tensor construction and grad lifecycle") {
  auto t = make_tensor<float>({2, 3}, true);
  CHECK(t->size() == 6);
  CHECK(t->rank() == 2);
  for (float v : t->data) CHECK(v == 0.0f);
  CHECK(t->grad.size() == 6);

  t->grad[0] = 5.0f;
  t->zero_grad();
  CHECK(t->grad[0] == 0.0f);

  t->set_requires_grad(false);
  CHECK(t->grad.empty());

  auto d = detach(t);
  CHECK_FALSE(d->requires_grad);
  CHECK(d->data == t->data);
  d->data[0] = 9.0f;
  CHECK(t->data[0] != 9.0f);
}

TEST_CASE("splitmix64 matches the published test vector") {
  uint64_t state = 0;
  CHECK(splitmix64_next(state) == 0xE220A8397B1DCDAFULL);
  CHECK(splitmix64_next(state) == 0x6E789E6AA1B965F4ULL);
  CHECK(splitmix64_next(state) == 0x06C45D188009454FULL);
}

TEST_CASE("Rng stream matches an independent xoshiro256** transcription") {
  XoRef ref;
  uint64_t sm = 42;
  for (auto& w : ref.s) w = splitmix64_next(sm);
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) CHECK(rng.next() == ref.next());
}

TEST_CASE("Rng distributions") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 10000; ++i) CHECK(rng.below(13) < 13);

  // below() must cover every residue of a small modulus.
  std::vector<int> seen(5, 0);
  for (int i = 0; i < 1000; ++i) seen[rng.below(5)]++;
  for (int c : seen) CHECK(c > 100);

  // Irwin-Hall: bounded by construction, roughly standard moments.
  double m = 0.0, m2 = 0.0;
  const int n = 200000;
  Rng g(123);
  for (int i = 0; i < n; ++i) {
    const double x = g.gauss();
    CHECK(std::abs(x) <= 6.0);
    m += x;
    m2 += x * x;
  }
  m /= n;
  CHECK(std::abs(m) < 0.01);
  CHECK(std::abs(m2 / n - m * m - 1.0) < 0.02);
}

TEST_CASE("substreams are reproducible and distinct") {
  Rng a = substream(7, 3);
  Rng b = substream(7, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  Rng c = substream(7, 4);
  Rng d = substream(7, 0);
  Rng base(7);
  CHECK(substream(7, 3).next() != c.next());
  CHECK(d.next() != base.next());
}

TEST_CASE("graph backward through a diamond accumulates fan-out") {
  // y = sum(x*x + 2*x): dy/dx = 2x + 2.
  Graph<double> g;
  auto x = full_like_values<double>({3}, {1.0, -2.0, 0.5}, true);
  auto sq = ops::mul(g, x, x);
  auto lin = ops::scale(g, x, 2.0);
  auto y = ops::sum(g, ops::add(g, sq, lin));
  CHECK(y->data[0] == doctest::Approx(1.0 + 2.0 + 4.0 - 4.0 + 0.25 + 1.0));

  g.backward(y);
  CHECK(x->grad[0] == doctest::Approx(4.0));
  CHECK(x->grad[1] == doctest::Approx(-2.0));
  CHECK(x->grad[2] == doctest::Approx(3.0));
}

TEST_CASE("repeated backward accumulates into leaves but not op outputs") {
  Graph<double> g;
  auto x = full_like_values<double>({2}, {3.0, 4.0}, true);
  auto y = ops::sum(g, ops::mul(g, x, x));
  g.backward(y);
  g.backward(y);
  // Leaves accumulate across calls; intermediate grads are reset internally,
  // so the second pass adds exactly one more gradient, not a doubled one.
  CHECK(x->grad[0] == doctest::Approx(12.0));
  CHECK(x->grad[1] == doctest::Approx(16.0));
}

TEST_CASE("ops validate shapes") {
  Graph<float> g;
  auto x = make_tensor<float>({1, 2, 4, 4});
  auto w = make_tensor<float>({3, 5, 3, 3});  // wrong input channels
  CHECK_THROWS_AS(ops::conv2d(g, x, w, {}, 1), std::invalid_argument);

  auto odd = make_tensor<float>({1, 1, 5, 4});
  CHECK_THROWS_AS(ops::maxpool2(g, odd), std::invalid_argument);

  auto a = make_tensor<float>({1, 2, 4, 4});
  auto b = make_tensor<float>({1, 2, 4, 6});
  CHECK_THROWS_AS(ops::add(g, a, b), std::invalid_argument);
  CHECK_THROWS_AS(ops::concat_channels(g, {a, b}), std::invalid_argument);

  auto v = make_tensor<float>({2, 3});
  auto lw = make_tensor<float>({4, 5});  // expects {O, 3}
  CHECK_THROWS_AS(ops::linear(g, v, lw, {}), std::invalid_argument);
}

TEST_CASE("conv2d kernels match the serial reference") {
  Rng rng(11);
  const int B = 2, C = 3, H = 13, W = 9, F = 4, k = 3, pad = 1;
  const int Ho = H, Wo = W;

  std::vector<double> x(size_t(B) * C * H * W), w(size_t(F) * C * k * k), bias(F);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  for (auto& v : bias) v = rng.uniform(-1.0, 1.0);

  std::vector<double> y(size_t(B) * F * Ho * Wo), yr(y.size());
  kernels::conv2d_forward(x.data(), B, C, H, W, w.data(), F, k, bias.data(), pad, y.data(), Ho, Wo);
  ref::conv2d_forward(x.data(), B, C, H, W, w.data(), F, k, bias.data(), pad, yr.data(), Ho, Wo);
  for (size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(yr[i]).epsilon(1e-12));

  std::vector<double> gy(y.size());
  for (auto& v : gy) v = rng.uniform(-1.0, 1.0);

  std::vector<double> gx(x.size(), 0.0), gxr(x.size(), 0.0);
  kernels::conv2d_backward_input(gy.data(), B, F, Ho, Wo, w.data(), C, k, pad, gx.data(), H, W);
  ref::conv2d_backward_input(gy.data(), B, F, Ho, Wo, w.data(), C, k, pad, gxr.data(), H, W);
  for (size_t i = 0; i < gx.size(); ++i) CHECK(gx[i] == doctest::Approx(gxr[i]).epsilon(1e-12));

  std::vector<double> gw(w.size(), 0.0), gwr(w.size(), 0.0);
  kernels::conv2d_backward_weight(gy.data(), B, F, Ho, Wo, x.data(), C, H, W, k, pad, gw.data());
  ref::conv2d_backward_weight(gy.data(), B, F, Ho, Wo, x.data(), C, H, W, k, pad, gwr.data());
  for (size_t i = 0; i < gw.size(); ++i) CHECK(gw[i] == doctest::Approx(gwr[i]).epsilon(1e-10));
}

TEST_CASE("conv2d float kernels track the double reference within float noise") {
  Rng rng(19);
  const int B = 2, C = 8, H = 16, W = 16, F = 8, k = 3, pad = 1;
  std::vector<float> x(size_t(B) * C * H * W), w(size_t(F) * C * k * k);
  std::vector<double> xd(x.size()), wd(w.size());
  for (size_t i = 0; i < x.size(); ++i) xd[i] = x[i] = float(rng.uniform(-1.0, 1.0));
  for (size_t i = 0; i < w.size(); ++i) wd[i] = w[i] = float(rng.uniform(-1.0, 1.0));

  std::vector<float> gy(size_t(B) * F * H * W);
  std::vector<double> gyd(gy.size());
  for (size_t i = 0; i < gy.size(); ++i) gyd[i] = gy[i] = float(rng.uniform(-1.0, 1.0));

  std::vector<float> gw(w.size(), 0.0f);
  std::vector<double> gwd(w.size(), 0.0);
  kernels::conv2d_backward_weight(gy.data(), B, F, H, W, x.data(), C, H, W, k, pad, gw.data());
  ref::conv2d_backward_weight(gyd.data(), B, F, H, W, xd.data(), C, H, W, k, pad, gwd.data());
  for (size_t i = 0; i < gw.size(); ++i) {
    const double scale = std::max(1.0, std::abs(gwd[i]));
    CHECK(std::abs(gw[i] - gwd[i]) / scale < 5e-4);
  }
}

TEST_CASE("maxpool matches reference including tie handling") {
  Rng rng(5);
  const int B = 2, C = 2, H = 8, W = 8;
  std::vector<double> x(size_t(B) * C * H * W);
  for (auto& v : x) v = rng.below(4);  // plenty of ties

  const int Ho = H / 2, Wo = W / 2;
  std::vector<double> y(size_t(B) * C * Ho * Wo), yr(y.size());
  std::vector<int64_t> am(y.size()), amr(y.size());
  kernels::maxpool2_forward(x.data(), B, C, H, W, y.data(), am.data());
  ref::maxpool2_forward(x.data(), B, C, H, W, yr.data(), amr.data());
  CHECK(y == yr);
  CHECK(am == amr);  // same element wins ties on both paths

  std::vector<double> gy(y.size(), 1.0), gx(x.size(), 0.0);
  kernels::maxpool2_backward(gy.data(), am.data(), int64_t(y.size()), gx.data());
  double total = 0.0;
  for (double v : gx) total += v;
  CHECK(total == doctest::Approx(double(y.size())));
}

TEST_CASE("elementwise and pooling ops compute hand values") {
  Graph<float> g;
  auto x = full_like_values<float>({1, 1, 2, 2}, {1.0f, -2.0f, 3.0f, -4.0f});
  auto r = ops::relu(g, x);
  CHECK(r->data == std::vector<float>{1.0f, 0.0f, 3.0f, 0.0f});

  auto s = ops::sigmoid(g, full_like_values<float>({1}, {0.0f}));
  CHECK(s->data[0] == doctest::Approx(0.5f));

  auto gap = ops::global_avg_pool(g, x);
  CHECK(gap->shape == Shape{1, 1});
  CHECK(gap->data[0] == doctest::Approx(-0.5f));

  auto up = ops::upsample2_nearest(g, full_like_values<float>({1, 1, 1, 2}, {1.0f, 2.0f}));
  CHECK(up->shape == Shape{1, 1, 2, 4});
  CHECK(up->data == std::vector<float>{1.0f, 1.0f, 2.0f, 2.0f, 1.0f, 1.0f, 2.0f, 2.0f});

  auto cat = ops::concat_channels(
      g, {full_like_values<float>({1, 1, 1, 2}, {1.0f, 2.0f}),
          full_like_values<float>({1, 2, 1, 2}, {3.0f, 4.0f, 5.0f, 6.0f})});
  CHECK(cat->shape == Shape{1, 3, 1, 2});
  CHECK(cat->data == std::vector<float>{1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f});

  auto lin = ops::linear(g, full_like_values<float>({1, 2}, {1.0f, 2.0f}),
                         full_like_values<float>({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f}),
                         full_like_values<float>({2}, {10.0f, 20.0f}));
  CHECK(lin->data == std::vector<float>{11.0f, 22.0f});
}

TEST_CASE("conv2d against a hand-computed 3x3 example") {
  Graph<double> g;
  // 3x3 image, identity-ish kernel: w picks the center plus the right pixel.
  auto x = full_like_values<double>({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto w = full_like_values<double>({1, 1, 3, 3}, {0, 0, 0, 0, 1, 1, 0, 0, 0});
  auto y = ops::conv2d(g, x, w, {}, 1);
  CHECK(y->shape == Shape{1, 1, 3, 3});
  // Each output = pixel + right neighbour (zero outside).
  CHECK(y->data == std::vector<double>{3, 5, 3, 9, 11, 6, 15, 17, 9});
}

TEST_CASE("adam takes the bias-corrected step") {
  auto p = full_like_values<double>({1}, {1.0}, true);
  AdamConfig<double> cfg;
  cfg.lr = 1e-3;
  Adam<double> opt({p});

  // Constant gradient: after bias correction every step is lr*g/(|g|+eps).
  p->grad[0] = 3.0;
  opt.step();
  CHECK(p->data[0] == doctest::Approx(1.0 - 1e-3 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));

  p->zero_grad();
  p->grad[0] = 3.0;
  opt.step();
  CHECK(p->data[0] == doctest::Approx(1.0 - 2e-3 * 3.0 / (3.0 + 1e-8)).epsilon(1e-9));
  CHECK(opt.steps() == 2);
}

TEST_CASE("adam rejects tensors without gradient storage") {
  auto p = make_tensor<float>({2}, false);
  CHECK_THROWS_AS(Adam<float>({p}), std::invalid_argument);
}

TEST_CASE("adam zero_grad clears every managed buffer") {
  auto a = make_tensor<float>({2}, true);
  auto b = make_tensor<float>({3}, true);
  Adam<float> opt({a, b});
  a->grad = {1.0f, 2.0f};
  b->grad = {3.0f, 4.0f, 5.0f};
  opt.zero_grad();
  for (float v : a->grad) CHECK(v == 0.0f);
  for (float v : b->grad) CHECK(v == 0.0f);
}

TEST_CASE("parallel kernels are invariant to the thread setting") {
  Rng rng(23);
  auto x = randu(rng, {2, 4, 12, 12});
  auto w = randu(rng, {4, 4, 3, 3});
  std::vector<float> y1(size_t(2) * 4 * 12 * 12), y2(y1.size());

  const int before = kernels::max_threads();
  kernels::set_threads(1);
  kernels::conv2d_forward(x->ptr(), 2, 4, 12, 12, w->ptr(), 4, 3,
                          static_cast<const float*>(nullptr), 1, y1.data(), 12, 12);
  kernels::set_threads(4);
  kernels::conv2d_forward(x->ptr(), 2, 4, 12, 12, w->ptr(), 4, 3,
                          static_cast<const float*>(nullptr), 1, y2.data(), 12, 12);
  kernels::set_threads(before);
  CHECK(y1 == y2);
}
