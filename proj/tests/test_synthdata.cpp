#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "attnet/synthdata.hpp"

using namespace attnet;
using synth::SynthSpec;

TEST_CASE("family names round-trip and reject junk") {
  using synth::ShapeFamily;
  for (auto f : {ShapeFamily::ellipse, ShapeFamily::rectangle, ShapeFamily::blob})
    CHECK(synth::family_from_name(synth::family_name(f)) == f);
  CHECK_THROWS_AS(synth::family_from_name("triangle"), std::invalid_argument);
}

TEST_CASE("spec validation rejects infeasible geometry") {
  SynthSpec ok;
  CHECK_NOTHROW(ok.validate());

  SynthSpec big = ok;
  big.size = 32;  // radius up to 14 cannot keep its 4px margin in 32px
  CHECK_THROWS_AS(big.validate(), std::invalid_argument);

  SynthSpec none = ok;
  none.count = 0;
  CHECK_THROWS_AS(none.validate(), std::invalid_argument);

  SynthSpec inverted = ok;
  inverted.radius_min = 10.0;
  inverted.radius_max = 6.0;
  CHECK_THROWS_AS(inverted.validate(), std::invalid_argument);
}

TEST_CASE("generation is deterministic and per-sample seeded") {
  SynthSpec spec;
  spec.count = 12;
  auto a = synth::generate(spec);
  auto b = synth::generate(spec);
  REQUIRE(a.size() == 12);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image->data == b[i].image->data);
    CHECK(a[i].mask.values == b[i].mask.values);
    CHECK(a[i].cx == b[i].cx);
    CHECK(a[i].cy == b[i].cy);
  }

  // Sample i depends only on (seed, i): a shorter run yields a prefix.
  SynthSpec shorter = spec;
  shorter.count = 5;
  auto c = synth::generate(shorter);
  for (size_t i = 0; i < c.size(); ++i) {
    CHECK(c[i].image->data == a[i].image->data);
    CHECK(c[i].mask.values == a[i].mask.values);
  }

  SynthSpec other = spec;
  other.seed = 2;
  auto d = synth::generate(other);
  CHECK(d[0].mask.values != a[0].mask.values);
}

TEST_CASE("samples have the documented geometry") {
  for (auto family : {synth::ShapeFamily::ellipse, synth::ShapeFamily::rectangle,
                      synth::ShapeFamily::blob}) {
    SynthSpec spec;
    spec.count = 20;
    spec.family = family;
    auto samples = synth::generate(spec);

    for (const auto& s : samples) {
      REQUIRE(s.image->shape == Shape{1, 64, 64});
      CHECK(s.mask.width == 64);
      CHECK(s.mask.height == 64);

      const int64_t fg = s.mask.foreground_count();
      CHECK(fg > 0);
      CHECK(fg < 64 * 64 / 2);  // object, not background

      // Image values clamped to [0,1].
      for (float v : s.image->data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }

      // The margin keeps every object off the border band (size/8 = 8px).
      double sx = 0.0, sy = 0.0;
      double fg_sum = 0.0, bg_sum = 0.0;
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
          const float pix = s.image->data[size_t(y) * 64 + x];
          if (s.mask.at(y, x)) {
            CHECK(x >= 8);
            CHECK(x <= 55);
            CHECK(y >= 8);
            CHECK(y <= 55);
            sx += x;
            sy += y;
            fg_sum += pix;
          } else {
            bg_sum += pix;
          }
        }
      }
      CHECK(s.cx == doctest::Approx(sx / double(fg)));
      CHECK(s.cy == doctest::Approx(sy / double(fg)));
      // Foreground is the bright side.
      CHECK(fg_sum / double(fg) > bg_sum / double(64 * 64 - fg));
    }
  }
}

TEST_CASE("split is a seeded permutation prefix") {
  SynthSpec spec;
  spec.count = 10;
  auto samples = synth::generate(spec);

  auto [tr1, te1] = synth::split(samples, 0.8, 42);
  auto [tr2, te2] = synth::split(samples, 0.8, 42);
  CHECK(tr1.size() == 8);
  CHECK(te1.size() == 2);
  REQUIRE(tr2.size() == tr1.size());
  for (size_t i = 0; i < tr1.size(); ++i)
    CHECK(tr1[i].mask.values == tr2[i].mask.values);

  auto [tr3, te3] = synth::split(samples, 0.8, 43);
  bool same = true;
  for (size_t i = 0; i < tr1.size(); ++i)
    if (tr1[i].image->data != tr3[i].image->data) same = false;
  CHECK_FALSE(same);

  // Index form tracks the sample form exactly.
  auto [ti, si] = synth::split_indices(10, 0.8, 42);
  REQUIRE(ti.size() == 8);
  REQUIRE(si.size() == 2);
  for (size_t i = 0; i < ti.size(); ++i)
    CHECK(samples[size_t(ti[i])].mask.values == tr1[i].mask.values);
  for (size_t i = 0; i < si.size(); ++i)
    CHECK(samples[size_t(si[i])].mask.values == te1[i].mask.values);

  // Union must cover every index exactly once.
  std::vector<int> seen(10, 0);
  for (int i : ti) seen[size_t(i)]++;
  for (int i : si) seen[size_t(i)]++;
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("split rejects degenerate fractions") {
  CHECK_THROWS_AS(synth::split_indices(10, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(synth::split_indices(10, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(synth::split_indices(10, 0.01, 1), std::invalid_argument);
  CHECK_NOTHROW(synth::split_indices(10, 0.5, 1));
}
