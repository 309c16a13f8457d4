#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnet/attention.hpp"
#include "attnet/tensor.hpp"

// Deterministic synthetic (image, mask, center) triples: one bright shape on
// a dark background with additive noise. Shape membership is decided by
// rational comparisons only (no transcendentals), so masks are bit-identical
// across platforms.

namespace attnet::synth {

enum class ShapeFamily { ellipse, rectangle, blob };

std::string family_name(ShapeFamily f);
ShapeFamily family_from_name(const std::string& name);  // throws listing valid names

struct SynthSpec {
  uint64_t seed = 1;
  int count = 200;
  int size = 64;
  ShapeFamily family = ShapeFamily::ellipse;
  double radius_min = 6.0;
  double radius_max = 14.0;
  double noise_sigma = 0.05;
  double fg_mean = 0.8;
  double bg_mean = 0.2;

  void validate() const;  // margin feasibility etc.; throws std::invalid_argument
};

struct Sample {
  TensorPtr<float> image;  // {1, size, size}, values in [0,1]
  attention::Mask mask;
  double cx = 0.0, cy = 0.0;  // centroid of the foreground, pixel units
};

// Exactly spec.count samples; sample i is a pure function of
// substream(spec.seed, i), so generation order and thread count are
// irrelevant to the result.
std::vector<Sample> generate(const SynthSpec& spec);

// Seeded shuffle then prefix split; lround(fraction*n) samples go to train.
// Rejects fractions that leave either side empty.
std::pair<std::vector<Sample>, std::vector<Sample>> split(const std::vector<Sample>& samples,
                                                          double train_fraction,
                                                          uint64_t seed);

// The same permutation split applied to sample indices, for keeping
// per-sample artifacts (supervision maps) aligned with a split.
std::pair<std::vector<int>, std::vector<int>> split_indices(int n, double train_fraction,
                                                            uint64_t seed);

}  // namespace attnet::synth
