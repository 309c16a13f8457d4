#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "attnet/losses.hpp"
#include "attnet/metrics.hpp"
#include "attnet/reference.hpp"
#include "attnet/rng.hpp"

using namespace attnet;
using attention::Mask;

namespace {
constexpr float kEps = 1e-6f;

TensorPtr<float> random_binary(Rng& rng, Shape shape) {
  auto t = make_tensor<float>(std::move(shape));
  for (auto& v : t->data) v = rng.uniform() < 0.5 ? 0.0f : 1.0f;
  return t;
}
}  // namespace

TEST_CASE("dice loss of a binary map against itself is almost zero") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_binary(rng, {2, 3, 6, 6});
    p->data[0] = 1.0f;  // keep each map from being all-zero
    p->data[36] = 1.0f;
    Graph<float> g;
    auto loss = losses::dice_loss(g, p, p, kEps);
    CHECK(std::abs(loss->data[0]) < 1e-5f);
  }
}

TEST_CASE("dice loss is bit-exact symmetric") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = make_tensor<float>({2, 2, 5, 5});
    auto b = make_tensor<float>({2, 2, 5, 5});
    for (auto& v : a->data) v = float(rng.uniform());
    for (auto& v : b->data) v = float(rng.uniform());
    Graph<float> g;
    const float ab = losses::dice_loss(g, a, b, kEps)->data[0];
    const float ba = losses::dice_loss(g, b, a, kEps)->data[0];
    CHECK(ab == ba);
  }
}

TEST_CASE("dice loss hand value: uniform half prediction") {
  // 8x8, target = top half. pred = 0.5 everywhere:
  // 1 - 2*16 / (16 + 32 + eps) = 0.3333333472.
  auto pred = make_tensor<float>({1, 1, 8, 8});
  auto target = make_tensor<float>({1, 1, 8, 8});
  for (auto& v : pred->data) v = 0.5f;
  for (int i = 0; i < 32; ++i) target->data[size_t(i)] = 1.0f;

  Graph<float> g;
  auto loss = losses::dice_loss(g, pred, target, kEps);
  CHECK(double(loss->data[0]) == doctest::Approx(0.3333333472).epsilon(1e-6));
}

TEST_CASE("all-zero map pairs contribute zero dice, not NaN") {
  auto p = make_tensor<float>({1, 2, 4, 4});
  auto t = make_tensor<float>({1, 2, 4, 4});
  // First map matches perfectly, second is empty on both sides.
  for (int i = 0; i < 16; ++i) p->data[size_t(i)] = t->data[size_t(i)] = 1.0f;

  Graph<float> g;
  auto loss = losses::dice_loss(g, p, t, kEps);
  // Map 1 dice ~ 1, map 2 dice = 0: loss = 1 - (1+0)/2.
  CHECK(double(loss->data[0]) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::isfinite(loss->data[0]));
}

TEST_CASE("dice loss matches the double-precision recomputation") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int maps = 3, per = 16;
    auto p = make_tensor<double>({1, maps, 4, 4});
    auto t = make_tensor<double>({1, maps, 4, 4});
    for (auto& v : p->data) v = rng.uniform();
    for (auto& v : t->data) v = rng.uniform();

    Graph<double> g;
    auto loss = losses::dice_loss(g, p, t, 1e-6);
    const double want = ref::dice_loss(p->data, t->data, maps, per, 1e-6);
    CHECK(loss->data[0] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("dice loss rejects shape mismatches") {
  Graph<float> g;
  auto a = make_tensor<float>({1, 1, 4, 4});
  auto b = make_tensor<float>({1, 1, 4, 5});
  CHECK_THROWS_AS(losses::dice_loss(g, a, b, kEps), std::invalid_argument);
}

TEST_CASE("localization loss is mse over batch and coordinates") {
  auto p = full_like_values<float>({2, 2}, {0.5f, 0.5f, 0.25f, 0.75f});
  auto t = full_like_values<float>({2, 2}, {0.0f, 1.0f, 0.25f, 0.5f});
  Graph<float> g;
  auto loss = losses::loc_loss(g, p, t);
  CHECK(loss->data[0] == doctest::Approx(0.140625f));

  auto bad = make_tensor<float>({2, 3});
  CHECK_THROWS_AS(losses::loc_loss(g, p, bad), std::invalid_argument);
}

TEST_CASE("dice score conventions") {
  Mask a(4, 4), b(4, 4);
  CHECK(metrics::dice_score(a, b) == 1.0);  // both empty: perfect by convention

  a.at(0, 0) = 1;
  CHECK(metrics::dice_score(a, b) == 0.0);

  b.at(0, 0) = 1;
  CHECK(metrics::dice_score(a, b) == 1.0);

  // |P|=2, |G|=4, overlap 2 -> 2*2/6.
  Mask p(4, 4), q(4, 4);
  p.at(1, 1) = p.at(1, 2) = 1;
  q.at(1, 1) = q.at(1, 2) = q.at(2, 1) = q.at(2, 2) = 1;
  CHECK(metrics::dice_score(p, q) == doctest::Approx(2.0 * 2.0 / 6.0));
}

TEST_CASE("hausdorff95 basics") {
  Mask a(8, 8), b(8, 8);
  a.at(2, 2) = 1;
  b.at(2, 2) = 1;
  CHECK(metrics::hausdorff95(a, b) == 0.0);

  Mask c(8, 8);
  c.at(5, 6) = 1;  // distance 5 from (2,2)
  CHECK(metrics::hausdorff95(a, c) == doctest::Approx(5.0));

  Mask empty(8, 8);
  CHECK_THROWS_AS(metrics::hausdorff95(a, empty), std::invalid_argument);
  CHECK_THROWS_AS(metrics::hausdorff95(empty, a), std::invalid_argument);
}

TEST_CASE("hausdorff95 matches the brute-force recomputation") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int w = 4 + int(rng.below(20));
    const int h = 4 + int(rng.below(20));
    Mask a(w, h), b(w, h);
    for (auto& v : a.values) v = rng.uniform() < 0.25 ? 1 : 0;
    for (auto& v : b.values) v = rng.uniform() < 0.25 ? 1 : 0;
    a.values[rng.below(a.values.size())] = 1;
    b.values[rng.below(b.values.size())] = 1;
    CHECK(metrics::hausdorff95(a, b) == ref::hausdorff95(a, b));
  }
}

TEST_CASE("combined score reproduces the hand-computed report values") {
  CHECK(metrics::s_score({88.9, 76.7, 71.5}, {4.86, 8.20, 4.46}) ==
        doctest::Approx(0.8935).epsilon(1e-9));
  CHECK(metrics::s_score({89.6, 79.7, 73.2}, {6.97, 9.48, 4.55}) ==
        doctest::Approx(0.8625).epsilon(1e-9));
  // Degenerate: perfect dice, zero distance.
  CHECK(metrics::s_score({100.0, 100.0, 100.0}, {0.0, 0.0, 0.0}) ==
        doctest::Approx(1.5));
}

TEST_CASE("euclidean distance") {
  CHECK(metrics::euclidean_distance(0, 0, 3, 4) == doctest::Approx(5.0));
  CHECK(metrics::euclidean_distance(1, 1, 1, 1) == 0.0);
}

TEST_CASE("eval report json round-trip and s recomputation") {
  metrics::EvalReport r;
  r.dice = {0.889, 0.767, 0.715};
  r.hausdorff95 = {4.86, 8.20, 4.46};
  r.ed = 2.5;
  r.n = 50;
  r.recompute_s();
  CHECK(r.s == doctest::Approx(0.8935).epsilon(1e-9));

  auto back = metrics::EvalReport::from_json(r.to_json());
  CHECK(back.dice == r.dice);
  CHECK(back.hausdorff95 == r.hausdorff95);
  CHECK(back.s == doctest::Approx(r.s));
  CHECK(back.ed == doctest::Approx(r.ed));
  CHECK(back.n == r.n);
}
