#include "attnet/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace attnet::ref {

template <typename T>
void conv2d_forward(const T* x, int B, int C, int H, int W, const T* w, int F, int k,
                    const T* bias, int pad, T* y, int Ho, int Wo) {
  for (int b = 0; b < B; ++b)
    for (int f = 0; f < F; ++f)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          T acc = bias[f];
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy + ky - pad, ix = ox + kx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x[((static_cast<int64_t>(b) * C + c) * H + iy) * W + ix] *
                       w[((static_cast<int64_t>(f) * C + c) * k + ky) * k + kx];
              }
          y[((static_cast<int64_t>(b) * F + f) * Ho + oy) * Wo + ox] = acc;
        }
}

template <typename T>
void conv2d_backward_input(const T* gy, int B, int F, int Ho, int Wo, const T* w, int C, int k,
                           int pad, T* gx, int H, int W) {
  // Scatter form: walk the forward loop and push each product back.
  for (int b = 0; b < B; ++b)
    for (int f = 0; f < F; ++f)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          const T go = gy[((static_cast<int64_t>(b) * F + f) * Ho + oy) * Wo + ox];
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy + ky - pad, ix = ox + kx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                gx[((static_cast<int64_t>(b) * C + c) * H + iy) * W + ix] +=
                    go * w[((static_cast<int64_t>(f) * C + c) * k + ky) * k + kx];
              }
        }
}

template <typename T>
void conv2d_backward_weight(const T* gy, int B, int F, int Ho, int Wo, const T* x, int C, int H,
                            int W, int k, int pad, T* gw) {
  for (int b = 0; b < B; ++b)
    for (int f = 0; f < F; ++f)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          const T go = gy[((static_cast<int64_t>(b) * F + f) * Ho + oy) * Wo + ox];
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy + ky - pad, ix = ox + kx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                gw[((static_cast<int64_t>(f) * C + c) * k + ky) * k + kx] +=
                    go * x[((static_cast<int64_t>(b) * C + c) * H + iy) * W + ix];
              }
        }
}

template <typename T>
void maxpool2_forward(const T* x, int B, int C, int H, int W, T* y, int64_t* argmax) {
  const int Ho = H / 2, Wo = W / 2;
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          T best = -std::numeric_limits<T>::infinity();
          int64_t best_at = -1;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int64_t at =
                  ((static_cast<int64_t>(b) * C + c) * H + 2 * oy + dy) * W + 2 * ox + dx;
              if (x[at] > best) {
                best = x[at];
                best_at = at;
              }
            }
          const int64_t o = ((static_cast<int64_t>(b) * C + c) * Ho + oy) * Wo + ox;
          y[o] = best;
          argmax[o] = best_at;
        }
}

template void conv2d_forward<float>(const float*, int, int, int, int, const float*, int, int,
                                    const float*, int, float*, int, int);
template void conv2d_forward<double>(const double*, int, int, int, int, const double*, int, int,
                                     const double*, int, double*, int, int);
template void conv2d_backward_input<float>(const float*, int, int, int, int, const float*, int,
                                           int, int, float*, int, int);
template void conv2d_backward_input<double>(const double*, int, int, int, int, const double*,
                                            int, int, int, double*, int, int);
template void conv2d_backward_weight<float>(const float*, int, int, int, int, const float*, int,
                                            int, int, int, int, float*);
template void conv2d_backward_weight<double>(const double*, int, int, int, int, const double*,
                                             int, int, int, int, int, double*);
template void maxpool2_forward<float>(const float*, int, int, int, int, float*, int64_t*);
template void maxpool2_forward<double>(const double*, int, int, int, int, double*, int64_t*);

std::vector<uint8_t> lattice_downsample(const std::vector<uint8_t>& mask, int H, int W,
                                        int factor) {
  if (factor < 1 || H % factor != 0 || W % factor != 0)
    throw std::invalid_argument("lattice_downsample: factor must divide both extents");
  const int h = H / factor, w = W / factor;
  std::vector<uint8_t> out(static_cast<size_t>(h) * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      out[static_cast<size_t>(i) * w + j] =
          mask[static_cast<size_t>(i) * factor * W + static_cast<size_t>(j) * factor] ? 1 : 0;
  return out;
}

std::vector<uint8_t> boundary4(const std::vector<uint8_t>& mask, int H, int W) {
  std::vector<uint8_t> out(static_cast<size_t>(H) * W, 0);
  auto bg = [&](int y, int x) {
    return y < 0 || y >= H || x < 0 || x >= W || !mask[static_cast<size_t>(y) * W + x];
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (mask[static_cast<size_t>(y) * W + x] &&
          (bg(y - 1, x) || bg(y + 1, x) || bg(y, x - 1) || bg(y, x + 1)))
        out[static_cast<size_t>(y) * W + x] = 1;
  return out;
}

namespace {

struct Pt {
  int y, x;
};

std::vector<Pt> collect(const std::vector<uint8_t>& grid, int H, int W) {
  std::vector<Pt> pts;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (grid[static_cast<size_t>(y) * W + x]) pts.push_back({y, x});
  return pts;
}

}  // namespace

std::vector<int64_t> euclidean_sq(const std::vector<uint8_t>& sites, int H, int W) {
  const auto pts = collect(sites, H, W);
  if (pts.empty()) throw std::invalid_argument("euclidean_sq: grid has no site cell");
  std::vector<int64_t> out(static_cast<size_t>(H) * W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      int64_t best = std::numeric_limits<int64_t>::max();
      for (const auto& p : pts) {
        const int64_t dy = y - p.y, dx = x - p.x;
        best = std::min(best, dy * dy + dx * dx);
      }
      out[static_cast<size_t>(y) * W + x] = best;
    }
  return out;
}

std::vector<int32_t> chebyshev(const std::vector<uint8_t>& sites, int H, int W) {
  const auto pts = collect(sites, H, W);
  if (pts.empty()) throw std::invalid_argument("chebyshev: grid has no site cell");
  std::vector<int32_t> out(static_cast<size_t>(H) * W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      int32_t best = std::numeric_limits<int32_t>::max();
      for (const auto& p : pts)
        best = std::min(best, std::max(std::abs(y - p.y), std::abs(x - p.x)));
      out[static_cast<size_t>(y) * W + x] = best;
    }
  return out;
}

double hausdorff95(const attention::Mask& pred, const attention::Mask& truth) {
  if (pred.width != truth.width || pred.height != truth.height)
    throw std::invalid_argument("hausdorff95: mask extents differ");
  const int H = pred.height, W = pred.width;
  const auto pa = collect(boundary4(pred.values, H, W), H, W);
  const auto pb = collect(boundary4(truth.values, H, W), H, W);
  if (pa.empty() || pb.empty())
    throw std::invalid_argument("hausdorff95: a mask has no foreground");
  std::vector<double> d;
  d.reserve(pa.size() + pb.size());
  auto nearest = [](const Pt& p, const std::vector<Pt>& q) {
    int64_t best = std::numeric_limits<int64_t>::max();
    for (const auto& o : q) {
      const int64_t dy = p.y - o.y, dx = p.x - o.x;
      best = std::min(best, dy * dy + dx * dx);
    }
    return std::sqrt(static_cast<double>(best));
  };
  for (const auto& p : pa) d.push_back(nearest(p, pb));
  for (const auto& p : pb) d.push_back(nearest(p, pa));
  std::sort(d.begin(), d.end());
  const int64_t n = static_cast<int64_t>(d.size());
  const int64_t rank = (95 * n + 99) / 100;  // nearest-rank, 1-based
  return d[static_cast<size_t>(rank - 1)];
}

std::vector<double> shape_map(const attention::Mask& mask, int factor) {
  const auto small = lattice_downsample(mask.values, mask.height, mask.width, factor);
  std::vector<double> out(small.size());
  for (size_t i = 0; i < small.size(); ++i) out[i] = small[i] ? 1.0 : 0.0;
  return out;
}

std::vector<double> contour_map(const attention::Mask& mask, int factor, double sigma) {
  const int h = mask.height / factor, w = mask.width / factor;
  const auto small = lattice_downsample(mask.values, mask.height, mask.width, factor);

  const int R = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k1(static_cast<size_t>(2 * R + 1));
  double ksum = 0.0;
  for (int r = -R; r <= R; ++r) {
    k1[static_cast<size_t>(r + R)] = std::exp(-0.5 * (r * r) / (sigma * sigma));
    ksum += k1[static_cast<size_t>(r + R)];
  }
  for (auto& v : k1) v /= ksum;

  // Dense 2-D blur with the outer-product kernel, zero outside the grid.
  std::vector<double> out(static_cast<size_t>(h) * w, 0.0);
  double mx = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -R; dy <= R; ++dy)
        for (int dx = -R; dx <= R; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          if (!small[static_cast<size_t>(yy) * w + xx]) continue;
          acc += k1[static_cast<size_t>(dy + R)] * k1[static_cast<size_t>(dx + R)];
        }
      out[static_cast<size_t>(y) * w + x] = acc;
      mx = std::max(mx, acc);
    }
  if (mx > 0.0)
    for (auto& v : out) v /= mx;
  return out;
}

std::vector<double> center_map(const attention::Mask& mask, int factor,
                               attention::DistMetric metric) {
  const int h = mask.height / factor, w = mask.width / factor;
  const auto small = lattice_downsample(mask.values, mask.height, mask.width, factor);
  bool any = false;
  for (auto v : small) any = any || v;
  if (!any) throw std::invalid_argument("center_map: no foreground after downsampling");

  // One-cell virtual background ring around the grid.
  const int hp = h + 2, wp = w + 2;
  std::vector<uint8_t> sites(static_cast<size_t>(hp) * wp, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (small[static_cast<size_t>(y) * w + x])
        sites[static_cast<size_t>(y + 1) * wp + (x + 1)] = 0;

  std::vector<double> d(static_cast<size_t>(h) * w);
  if (metric == attention::DistMetric::euclidean) {
    const auto sq = euclidean_sq(sites, hp, wp);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        d[static_cast<size_t>(y) * w + x] =
            std::sqrt(static_cast<double>(sq[static_cast<size_t>(y + 1) * wp + (x + 1)]));
  } else {
    const auto ch = chebyshev(sites, hp, wp);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        d[static_cast<size_t>(y) * w + x] =
            static_cast<double>(ch[static_cast<size_t>(y + 1) * wp + (x + 1)]);
  }
  const double mx = *std::max_element(d.begin(), d.end());
  for (auto& v : d) v /= mx;
  return d;
}

double dice_loss(const std::vector<double>& pred, const std::vector<double>& target,
                 int64_t maps, int64_t per_map, double eps) {
  if (pred.size() != target.size() ||
      static_cast<int64_t>(pred.size()) != maps * per_map)
    throw std::invalid_argument("dice_loss: size mismatch");
  double acc = 0.0;
  for (int64_t m = 0; m < maps; ++m) {
    double pg = 0.0, pp = 0.0, gg = 0.0;
    for (int64_t i = 0; i < per_map; ++i) {
      const double p = pred[static_cast<size_t>(m * per_map + i)];
      const double g = target[static_cast<size_t>(m * per_map + i)];
      pg += p * g;
      pp += p * p;
      gg += g * g;
    }
    acc += 2.0 * pg / (pp + gg + eps);
  }
  return 1.0 - acc / static_cast<double>(maps);
}

}  // namespace attnet::ref
