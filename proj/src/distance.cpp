#include "attnet/distance.hpp"

#include <algorithm>
#include <stdexcept>

namespace attnet::dist {

namespace {

constexpr int64_t kFar = int64_t(1) << 40;  // finite "infinity"; sums stay exact in double

// 1-D squared-distance transform d[x] = min_q ((x-q)^2 + f[q]), the
// lower-envelope-of-parabolas method. v/z are scratch of size n and n+1.
void dt1d(const int64_t* f, int n, int64_t* d, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -1e30;
  z[1] = 1e30;
  auto intersect = [&](int q, int p) {
    return (static_cast<double>(f[q] - f[p]) +
            static_cast<double>(static_cast<int64_t>(q) * q - static_cast<int64_t>(p) * p)) /
           (2.0 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = 1e30;
  }
  k = 0;
  for (int x = 0; x < n; ++x) {
    while (z[k + 1] < x) ++k;
    const int64_t dx = x - v[k];
    d[x] = dx * dx + f[v[k]];
  }
}

}  // namespace

std::vector<int64_t> euclidean_sq(const std::vector<uint8_t>& sites, int H, int W) {
  const size_t n = static_cast<size_t>(H) * W;
  bool any = false;
  for (size_t i = 0; i < n; ++i)
    if (sites[i]) {
      any = true;
      break;
    }
  if (!any) throw std::invalid_argument("euclidean_sq: grid has no site cell");

  // Phase 1 (per column): squared distance to the nearest site row.
  std::vector<int64_t> col(n, kFar);
  for (int x = 0; x < W; ++x) {
    int64_t run = kFar;
    for (int y = 0; y < H; ++y) {
      run = sites[static_cast<size_t>(y) * W + x] ? 0 : (run >= kFar ? kFar : run + 1);
      col[static_cast<size_t>(y) * W + x] = run;
    }
    run = kFar;
    for (int y = H - 1; y >= 0; --y) {
      run = sites[static_cast<size_t>(y) * W + x] ? 0 : (run >= kFar ? kFar : run + 1);
      auto& c = col[static_cast<size_t>(y) * W + x];
      c = std::min(c, run);
    }
  }
  for (auto& c : col) c = (c >= kFar) ? kFar : c * c;

  // Phase 2 (per row): general 1-D transform over the column results.
  std::vector<int64_t> out(n);
  std::vector<int64_t> drow(static_cast<size_t>(W));
  std::vector<int> v(static_cast<size_t>(W));
  std::vector<double> z(static_cast<size_t>(W) + 1);
  for (int y = 0; y < H; ++y) {
    dt1d(col.data() + static_cast<size_t>(y) * W, W, drow.data(), v.data(), z.data());
    std::copy(drow.begin(), drow.end(), out.begin() + static_cast<size_t>(y) * W);
  }
  return out;
}

std::vector<int32_t> chebyshev(const std::vector<uint8_t>& sites, int H, int W) {
  const size_t n = static_cast<size_t>(H) * W;
  bool any = false;
  for (size_t i = 0; i < n; ++i)
    if (sites[i]) {
      any = true;
      break;
    }
  if (!any) throw std::invalid_argument("chebyshev: grid has no site cell");

  constexpr int32_t kBig = 1 << 29;
  std::vector<int32_t> d(n, kBig);
  for (size_t i = 0; i < n; ++i)
    if (sites[i]) d[i] = 0;

  auto relax = [&](size_t p, int y, int x) {
    if (y < 0 || y >= H || x < 0 || x >= W) return;
    const int32_t c = d[static_cast<size_t>(y) * W + x] + 1;
    if (c < d[p]) d[p] = c;
  };
  // The unit-weight 8-neighbour chamfer is exact for the L-inf metric.
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const size_t p = static_cast<size_t>(y) * W + x;
      relax(p, y - 1, x - 1);
      relax(p, y - 1, x);
      relax(p, y - 1, x + 1);
      relax(p, y, x - 1);
    }
  for (int y = H - 1; y >= 0; --y)
    for (int x = W - 1; x >= 0; --x) {
      const size_t p = static_cast<size_t>(y) * W + x;
      relax(p, y + 1, x + 1);
      relax(p, y + 1, x);
      relax(p, y + 1, x - 1);
      relax(p, y, x + 1);
    }
  return d;
}

}  // namespace attnet::dist
