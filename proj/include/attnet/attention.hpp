#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnet/tensor.hpp"

// Task-specific attention maps generated from binary masks: plain
// downsampling (shape), Gaussian-blurred shape with max-normalization
// (contour), and a normalized distance-to-background map (center).

namespace attnet::attention {

struct Mask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> values;  // row-major height*width, each 0 or 1

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), values(static_cast<size_t>(w) * h, 0) {}

  uint8_t& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
  int64_t foreground_count() const;
};

enum class MapKind { shape, contour, center };
enum class DistMetric { euclidean, chebyshev };

std::string kind_name(MapKind k);
MapKind kind_from_name(const std::string& name);  // throws listing the valid names
std::string metric_name(DistMetric m);
DistMetric metric_from_name(const std::string& name);

struct AttentionMap {
  MapKind kind = MapKind::shape;
  DistMetric metric = DistMetric::chebyshev;  // meaningful for center maps only
  int width = 0;
  int height = 0;
  int downsample_factor = 1;
  std::vector<float> values;  // row-major height*width, all in [0,1]

  float at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

struct MapParams {
  double sigma = 2.0;  // contour maps; in output-map pixels
  DistMetric metric = DistMetric::chebyshev;
};

// Top-left lattice sampling: out(i,j) = mask(i*factor, j*factor).
// Mask dimensions must be divisible by factor.
AttentionMap shape_map(const Mask& mask, int factor);

// shape_map blurred by a unit-sum Gaussian (radius ceil(3*sigma), zero
// padding), then divided by its global maximum. An all-zero mask yields an
// all-zero map and sets *all_zero_warning instead of normalizing.
AttentionMap contour_map(const Mask& mask, int factor, double sigma,
                         bool* all_zero_warning = nullptr);

// Distance from each foreground pixel to the nearest background pixel
// (pixels outside the image count as background), divided by the largest
// distance so the interior maximum is exactly 1. Throws if the downsampled
// mask has no foreground.
AttentionMap center_map(const Mask& mask, int factor, DistMetric metric);

// Stack one map per mask into a {N,H',W'} tensor; channel t is the
// transform of mask t under kinds[t].
TensorPtr<float> build_supervision(const std::vector<Mask>& masks,
                                   const std::vector<MapKind>& kinds, int factor,
                                   const MapParams& params);

}  // namespace attnet::attention
