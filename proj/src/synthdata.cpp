#include "attnet/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "attnet/rng.hpp"

namespace attnet::synth {

std::string family_name(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::ellipse: return "ellipse";
    case ShapeFamily::rectangle: return "rectangle";
    case ShapeFamily::blob: return "blob";
  }
  return "?";
}

ShapeFamily family_from_name(const std::string& name) {
  if (name == "ellipse") return ShapeFamily::ellipse;
  if (name == "rectangle") return ShapeFamily::rectangle;
  if (name == "blob") return ShapeFamily::blob;
  throw std::invalid_argument("unknown shape family '" + name +
                              "' (valid: ellipse, rectangle, blob)");
}

namespace {

// Blob satellites stay within offset r/2 and radius 3r/4 of the main
// ellipse, so the whole figure fits in 1.25x the sampled radius.
double extent_bound(const SynthSpec& s) {
  return s.family == ShapeFamily::blob ? 1.25 * s.radius_max : s.radius_max;
}

}  // namespace

void SynthSpec::validate() const {
  if (count < 1) throw std::invalid_argument("synth: count must be >= 1, got " + std::to_string(count));
  if (size < 8 || size % 4 != 0)
    throw std::invalid_argument("synth: size must be >= 8 and divisible by 4, got " +
                                std::to_string(size));
  if (!(radius_min >= 1.0) || !(radius_max >= radius_min))
    throw std::invalid_argument("synth: need 1 <= radius_min <= radius_max, got [" +
                                std::to_string(radius_min) + ", " + std::to_string(radius_max) + "]");
  if (!(noise_sigma >= 0.0))
    throw std::invalid_argument("synth: noise_sigma must be >= 0, got " + std::to_string(noise_sigma));
  if (fg_mean < 0.0 || fg_mean > 1.0 || bg_mean < 0.0 || bg_mean > 1.0)
    throw std::invalid_argument("synth: intensity means must lie in [0,1]");
  const double margin = size / 8.0;
  const double e = extent_bound(*this);
  if (margin + e > (size - 1) - margin - e)
    throw std::invalid_argument(
        "synth: radius range [" + std::to_string(radius_min) + ", " +
        std::to_string(radius_max) + "] cannot fit a " + std::to_string(size) + "px image "
        "inside its " + std::to_string(margin) + "px margin");
}

namespace {

struct Ellipse {
  double cx, cy, a, b;
  bool contains(double x, double y) const {
    const double dx = (x - cx) / a, dy = (y - cy) / b;
    return dx * dx + dy * dy <= 1.0;
  }
};

struct Figure {
  ShapeFamily family;
  std::vector<Ellipse> parts;  // ellipse/blob; rectangle reuses parts[0] extents
  bool contains(double x, double y) const {
    if (family == ShapeFamily::rectangle) {
      const auto& e = parts[0];
      return std::abs(x - e.cx) <= e.a && std::abs(y - e.cy) <= e.b;
    }
    for (const auto& e : parts)
      if (e.contains(x, y)) return true;
    return false;
  }
};

Sample make_sample(const SynthSpec& spec, int index) {
  Rng rng = substream(spec.seed, static_cast<uint64_t>(index));
  const double margin = spec.size / 8.0;
  const double e = extent_bound(spec);
  const double lo = margin + e, hi = (spec.size - 1) - margin - e;

  Figure fig;
  fig.family = spec.family;
  // Draw order is fixed per family: radii, center, then satellite triples.
  const double a = rng.uniform(spec.radius_min, spec.radius_max);
  const double b = rng.uniform(spec.radius_min, spec.radius_max);
  const double cx = rng.uniform(lo, hi);
  const double cy = rng.uniform(lo, hi);
  fig.parts.push_back({cx, cy, a, b});
  if (spec.family == ShapeFamily::blob) {
    for (int s = 0; s < 3; ++s) {
      const double r = 0.5 * (a + b);
      const double ox = rng.uniform(-r / 2, r / 2);
      const double oy = rng.uniform(-r / 2, r / 2);
      const double sa = rng.uniform(r / 2, 0.75 * r);
      const double sb = rng.uniform(r / 2, 0.75 * r);
      fig.parts.push_back({cx + ox, cy + oy, sa, sb});
    }
  }

  Sample smp;
  smp.mask = attention::Mask(spec.size, spec.size);
  smp.image = make_tensor<float>({1, spec.size, spec.size});
  int64_t fg = 0;
  double sx = 0.0, sy = 0.0;
  for (int y = 0; y < spec.size; ++y)
    for (int x = 0; x < spec.size; ++x) {
      if (fig.contains(x, y)) {
        smp.mask.at(y, x) = 1;
        ++fg;
        sx += x;
        sy += y;
      }
    }
  if (fg == 0)
    throw std::runtime_error("synth: generated an empty mask (index " +
                             std::to_string(index) + ") — radius/margin bug");
  smp.cx = sx / static_cast<double>(fg);
  smp.cy = sy / static_cast<double>(fg);

  // Noise consumes one gauss() per pixel in row-major order even when
  // sigma is 0, keeping the stream layout independent of parameters.
  float* img = smp.image->ptr();
  for (int y = 0; y < spec.size; ++y)
    for (int x = 0; x < spec.size; ++x) {
      const double base = smp.mask.at(y, x) ? spec.fg_mean : spec.bg_mean;
      const double v = base + spec.noise_sigma * rng.gauss();
      img[static_cast<int64_t>(y) * spec.size + x] =
          static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  return smp;
}

}  // namespace

std::vector<Sample> generate(const SynthSpec& spec) {
  spec.validate();
  std::vector<Sample> out(static_cast<size_t>(spec.count));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < spec.count; ++i) out[static_cast<size_t>(i)] = make_sample(spec, i);
  return out;
}

std::pair<std::vector<int>, std::vector<int>> split_indices(int n, double train_fraction,
                                                            uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split: train_fraction must be in (0,1), got " +
                                std::to_string(train_fraction));
  const int n_train = static_cast<int>(std::llround(train_fraction * n));
  if (n_train <= 0 || n_train >= n)
    throw std::invalid_argument("split: fraction " + std::to_string(train_fraction) +
                                " of " + std::to_string(n) + " samples leaves a side empty");
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  Rng rng = substream(seed, 0xD1CEull);
  for (int j = n - 1; j >= 1; --j)
    std::swap(idx[static_cast<size_t>(j)],
              idx[static_cast<size_t>(rng.below(static_cast<uint64_t>(j) + 1))]);
  return {std::vector<int>(idx.begin(), idx.begin() + n_train),
          std::vector<int>(idx.begin() + n_train, idx.end())};
}

std::pair<std::vector<Sample>, std::vector<Sample>> split(const std::vector<Sample>& samples,
                                                          double train_fraction,
                                                          uint64_t seed) {
  auto [ti, si] = split_indices(static_cast<int>(samples.size()), train_fraction, seed);
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (int i : ti) out.first.push_back(samples[static_cast<size_t>(i)]);
  for (int i : si) out.second.push_back(samples[static_cast<size_t>(i)]);
  return out;
}

}  // namespace attnet::synth
