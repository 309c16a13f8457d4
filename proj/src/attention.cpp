#include "attnet/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "attnet/distance.hpp"

namespace attnet::attention {

int64_t Mask::foreground_count() const {
  int64_t n = 0;
  for (uint8_t v : values) n += v != 0;
  return n;
}

std::string kind_name(MapKind k) {
  switch (k) {
    case MapKind::shape: return "shape";
    case MapKind::contour: return "contour";
    case MapKind::center: return "center";
  }
  return "?";
}

MapKind kind_from_name(const std::string& name) {
  if (name == "shape") return MapKind::shape;
  if (name == "contour") return MapKind::contour;
  if (name == "center") return MapKind::center;
  throw std::invalid_argument("unknown attention-map kind '" + name +
                              "' (valid: shape, contour, center)");
}

std::string metric_name(DistMetric m) {
  return m == DistMetric::euclidean ? "euclidean" : "chebyshev";
}

DistMetric metric_from_name(const std::string& name) {
  if (name == "euclidean") return DistMetric::euclidean;
  if (name == "chebyshev") return DistMetric::chebyshev;
  throw std::invalid_argument("unknown distance metric '" + name +
                              "' (valid: euclidean, chebyshev)");
}

namespace {

void check_factor(const Mask& mask, int factor, const char* op) {
  if (factor < 1)
    throw std::invalid_argument(std::string(op) + ": factor must be >= 1, got " +
                                std::to_string(factor));
  if (mask.width % factor != 0 || mask.height % factor != 0)
    throw std::invalid_argument(std::string(op) + ": mask " + std::to_string(mask.width) +
                                "x" + std::to_string(mask.height) +
                                " not divisible by factor " + std::to_string(factor));
}

}  // namespace

AttentionMap shape_map(const Mask& mask, int factor) {
  check_factor(mask, factor, "shape_map");
  AttentionMap out;
  out.kind = MapKind::shape;
  out.width = mask.width / factor;
  out.height = mask.height / factor;
  out.downsample_factor = factor;
  out.values.resize(static_cast<size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out.values[static_cast<size_t>(y) * out.width + x] =
          mask.at(y * factor, x * factor) ? 1.0f : 0.0f;
  return out;
}

AttentionMap contour_map(const Mask& mask, int factor, double sigma,
                         bool* all_zero_warning) {
  if (all_zero_warning) *all_zero_warning = false;
  if (!(sigma > 0.0))
    throw std::invalid_argument("contour_map: sigma must be > 0, got " +
                                std::to_string(sigma));
  AttentionMap out = shape_map(mask, factor);
  out.kind = MapKind::contour;
  const int H = out.height, W = out.width;

  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<size_t>(2 * r + 1));
  double wsum = 0.0;
  for (int i = -r; i <= r; ++i) {
    w[static_cast<size_t>(i + r)] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    wsum += w[static_cast<size_t>(i + r)];
  }
  for (auto& v : w) v /= wsum;  // 1-D unit sum => separable 2-D kernel unit sum

  std::vector<double> tmp(static_cast<size_t>(H) * W, 0.0);
  std::vector<double> blur(static_cast<size_t>(H) * W, 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      const int lo = std::max(-r, -x), hi = std::min(r, W - 1 - x);
      for (int i = lo; i <= hi; ++i)
        acc += w[static_cast<size_t>(i + r)] *
               out.values[static_cast<size_t>(y) * W + (x + i)];
      tmp[static_cast<size_t>(y) * W + x] = acc;
    }
  }
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      const int lo = std::max(-r, -y), hi = std::min(r, H - 1 - y);
      for (int i = lo; i <= hi; ++i)
        acc += w[static_cast<size_t>(i + r)] * tmp[static_cast<size_t>(y + i) * W + x];
      blur[static_cast<size_t>(y) * W + x] = acc;
    }
  }

  double mx = 0.0;
  for (double v : blur) mx = std::max(mx, v);
  if (mx == 0.0) {
    if (all_zero_warning) *all_zero_warning = true;
    std::fill(out.values.begin(), out.values.end(), 0.0f);
    return out;
  }
  for (size_t i = 0; i < blur.size(); ++i)
    out.values[i] = static_cast<float>(blur[i] / mx);
  return out;
}

AttentionMap center_map(const Mask& mask, int factor, DistMetric metric) {
  AttentionMap out = shape_map(mask, factor);
  out.kind = MapKind::center;
  out.metric = metric;
  const int H = out.height, W = out.width;

  bool any_fg = false;
  for (float v : out.values) any_fg = any_fg || v != 0.0f;
  if (!any_fg)
    throw std::invalid_argument("center_map: no foreground after downsampling " +
                                std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                                " by factor " + std::to_string(factor));

  // Pad with a one-pixel background ring so pixels outside the image count
  // as background.
  const int Hp = H + 2, Wp = W + 2;
  std::vector<uint8_t> sites(static_cast<size_t>(Hp) * Wp, 0);
  for (int y = 0; y < Hp; ++y)
    for (int x = 0; x < Wp; ++x) {
      const bool border = y == 0 || y == Hp - 1 || x == 0 || x == Wp - 1;
      const bool bg = border || out.values[static_cast<size_t>(y - 1) * W + (x - 1)] == 0.0f;
      sites[static_cast<size_t>(y) * Wp + x] = bg ? 1 : 0;
    }

  std::vector<double> d(static_cast<size_t>(H) * W, 0.0);
  if (metric == DistMetric::euclidean) {
    const auto sq = dist::euclidean_sq(sites, Hp, Wp);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        d[static_cast<size_t>(y) * W + x] =
            std::sqrt(static_cast<double>(sq[static_cast<size_t>(y + 1) * Wp + (x + 1)]));
  } else {
    const auto ch = dist::chebyshev(sites, Hp, Wp);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        d[static_cast<size_t>(y) * W + x] =
            static_cast<double>(ch[static_cast<size_t>(y + 1) * Wp + (x + 1)]);
  }

  double dmax = 0.0;
  for (size_t i = 0; i < d.size(); ++i)
    if (out.values[i] != 0.0f) dmax = std::max(dmax, d[i]);
  for (size_t i = 0; i < d.size(); ++i)
    out.values[i] = out.values[i] != 0.0f ? static_cast<float>(d[i] / dmax) : 0.0f;
  return out;
}

TensorPtr<float> build_supervision(const std::vector<Mask>& masks,
                                   const std::vector<MapKind>& kinds, int factor,
                                   const MapParams& params) {
  if (masks.empty()) throw std::invalid_argument("build_supervision: no masks");
  if (kinds.size() != masks.size())
    throw std::invalid_argument("build_supervision: " + std::to_string(masks.size()) +
                                " masks but " + std::to_string(kinds.size()) + " kinds");
  for (const auto& m : masks)
    if (m.width != masks[0].width || m.height != masks[0].height)
      throw std::invalid_argument("build_supervision: mask dims differ: " +
                                  std::to_string(masks[0].width) + "x" +
                                  std::to_string(masks[0].height) + " vs " +
                                  std::to_string(m.width) + "x" + std::to_string(m.height));

  const int N = static_cast<int>(masks.size());
  const int Ho = masks[0].height / factor, Wo = masks[0].width / factor;
  auto out = make_tensor<float>({N, Ho, Wo});
  for (int t = 0; t < N; ++t) {
    AttentionMap m;
    switch (kinds[static_cast<size_t>(t)]) {
      case MapKind::shape: m = shape_map(masks[static_cast<size_t>(t)], factor); break;
      case MapKind::contour:
        m = contour_map(masks[static_cast<size_t>(t)], factor, params.sigma);
        break;
      case MapKind::center:
        m = center_map(masks[static_cast<size_t>(t)], factor, params.metric);
        break;
    }
    std::copy(m.values.begin(), m.values.end(),
              out->ptr() + static_cast<int64_t>(t) * Ho * Wo);
  }
  return out;
}

}  // namespace attnet::attention
