// Times the OpenMP kernels against the serial reference implementations on
// training-shaped workloads and reports the worst element difference, which
// doubles as a quick numerical sanity check outside the test suite.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include <CLI11.hpp>

#include "attnet/kernels.hpp"
#include "attnet/reference.hpp"
#include "attnet/rng.hpp"

using namespace attnet;

namespace {

std::vector<float> randn(Rng& rng, int64_t n) {
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<float>(rng.gauss());
  return v;
}

double time_best_ms(const std::function<void()>& fn, int repeats) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

struct Row {
  const char* name;
  std::string shape;
  double serial_ms, parallel_ms, diff;
};

void print_rows(const std::vector<Row>& rows) {
  std::printf("%-22s %-26s %12s %12s %9s %12s\n", "kernel", "shape", "serial ms",
              "parallel ms", "speedup", "max |diff|");
  for (const auto& r : rows)
    std::printf("%-22s %-26s %12.3f %12.3f %8.2fx %12.3e\n", r.name, r.shape.c_str(),
                r.serial_ms, r.parallel_ms, r.serial_ms / r.parallel_ms, r.diff);
}

}  // namespace

int main(int argc, char** argv) {
  int repeats = 5, threads = 0;
  CLI::App app{"kernel benchmark: OpenMP vs serial reference"};
  app.add_option("--repeats", repeats, "timing repeats, best kept")->capture_default_str();
  app.add_option("--threads", threads, "OpenMP thread cap (0 = library default)")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) kernels::set_threads(threads);
  std::printf("threads: %d\n", kernels::max_threads());

  Rng rng(42);
  std::vector<Row> rows;

  struct ConvCase {
    int B, C, H, W, F, k, pad;
  };
  // The encoder's first conv, a mid-block conv, and the decoder's fused conv.
  for (const ConvCase cc : {ConvCase{8, 1, 64, 64, 16, 3, 1}, ConvCase{8, 40, 32, 32, 8, 3, 1},
                            ConvCase{8, 96, 32, 32, 32, 3, 1}}) {
    const int Ho = cc.H, Wo = cc.W;
    const auto x = randn(rng, static_cast<int64_t>(cc.B) * cc.C * cc.H * cc.W);
    const auto w = randn(rng, static_cast<int64_t>(cc.F) * cc.C * cc.k * cc.k);
    const auto b = randn(rng, cc.F);
    char shape[64];
    std::snprintf(shape, sizeof shape, "%dx%dx%dx%d f%d k%d", cc.B, cc.C, cc.H, cc.W, cc.F,
                  cc.k);

    std::vector<float> y_par(static_cast<size_t>(cc.B) * cc.F * Ho * Wo);
    std::vector<float> y_ser(y_par.size());
    const double tp = time_best_ms(
        [&] {
          kernels::conv2d_forward(x.data(), cc.B, cc.C, cc.H, cc.W, w.data(), cc.F, cc.k,
                                  b.data(), cc.pad, y_par.data(), Ho, Wo);
        },
        repeats);
    const double ts = time_best_ms(
        [&] {
          ref::conv2d_forward(x.data(), cc.B, cc.C, cc.H, cc.W, w.data(), cc.F, cc.k, b.data(),
                              cc.pad, y_ser.data(), Ho, Wo);
        },
        repeats);
    rows.push_back({"conv2d_forward", shape, ts, tp, max_abs_diff(y_par, y_ser)});

    const auto gy = randn(rng, static_cast<int64_t>(y_par.size()));
    std::vector<float> gx_par(x.size()), gx_ser(x.size());
    const double tpb = time_best_ms(
        [&] {
          std::fill(gx_par.begin(), gx_par.end(), 0.0f);
          kernels::conv2d_backward_input(gy.data(), cc.B, cc.F, Ho, Wo, w.data(), cc.C, cc.k,
                                         cc.pad, gx_par.data(), cc.H, cc.W);
        },
        repeats);
    const double tsb = time_best_ms(
        [&] {
          std::fill(gx_ser.begin(), gx_ser.end(), 0.0f);
          ref::conv2d_backward_input(gy.data(), cc.B, cc.F, Ho, Wo, w.data(), cc.C, cc.k,
                                     cc.pad, gx_ser.data(), cc.H, cc.W);
        },
        repeats);
    rows.push_back({"conv2d_backward_input", shape, tsb, tpb, max_abs_diff(gx_par, gx_ser)});

    std::vector<float> gw_par(w.size()), gw_ser(w.size());
    const double tpw = time_best_ms(
        [&] {
          std::fill(gw_par.begin(), gw_par.end(), 0.0f);
          kernels::conv2d_backward_weight(gy.data(), cc.B, cc.F, Ho, Wo, x.data(), cc.C, cc.H,
                                          cc.W, cc.k, cc.pad, gw_par.data());
        },
        repeats);
    const double tsw = time_best_ms(
        [&] {
          std::fill(gw_ser.begin(), gw_ser.end(), 0.0f);
          ref::conv2d_backward_weight(gy.data(), cc.B, cc.F, Ho, Wo, x.data(), cc.C, cc.H, cc.W,
                                      cc.k, cc.pad, gw_ser.data());
        },
        repeats);
    rows.push_back({"conv2d_backward_weight", shape, tsw, tpw, max_abs_diff(gw_par, gw_ser)});
  }

  {
    const int B = 8, C = 32, H = 64, W = 64;
    const auto x = randn(rng, static_cast<int64_t>(B) * C * H * W);
    std::vector<float> y_par(static_cast<size_t>(B) * C * (H / 2) * (W / 2)), y_ser(y_par.size());
    std::vector<int64_t> am_par(y_par.size()), am_ser(y_par.size());
    const double tp = time_best_ms(
        [&] { kernels::maxpool2_forward(x.data(), B, C, H, W, y_par.data(), am_par.data()); },
        repeats);
    const double ts = time_best_ms(
        [&] { ref::maxpool2_forward(x.data(), B, C, H, W, y_ser.data(), am_ser.data()); },
        repeats);
    double diff = max_abs_diff(y_par, y_ser);
    for (size_t i = 0; i < am_par.size(); ++i)
      if (am_par[i] != am_ser[i]) diff = std::max(diff, 1.0);
    rows.push_back({"maxpool2_forward", "8x32x64x64", ts, tp, diff});
  }

  print_rows(rows);
  return 0;
}
