#include "attnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "attnet/distance.hpp"

namespace attnet::metrics {

namespace {

void check_dims(const Mask& a, const Mask& b, const char* op) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument(std::string(op) + ": mask dims differ: " +
                                std::to_string(a.width) + "x" + std::to_string(a.height) +
                                " vs " + std::to_string(b.width) + "x" +
                                std::to_string(b.height));
}

// Foreground pixels with at least one 4-neighbour that is background or
// outside the image (erosion residue).
std::vector<uint8_t> boundary4(const Mask& m) {
  std::vector<uint8_t> b(m.values.size(), 0);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      const bool interior = y > 0 && y < m.height - 1 && x > 0 && x < m.width - 1 &&
                            m.at(y - 1, x) && m.at(y + 1, x) && m.at(y, x - 1) &&
                            m.at(y, x + 1);
      if (!interior) b[static_cast<size_t>(y) * m.width + x] = 1;
    }
  return b;
}

}  // namespace

double dice_score(const Mask& pred, const Mask& gt) {
  check_dims(pred, gt, "dice_score");
  int64_t inter = 0, np = 0, ng = 0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    const bool p = pred.values[i] != 0, g = gt.values[i] != 0;
    inter += p && g;
    np += p;
    ng += g;
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

double hausdorff95(const Mask& pred, const Mask& gt) {
  check_dims(pred, gt, "hausdorff95");
  if (pred.foreground_count() == 0 || gt.foreground_count() == 0)
    throw std::invalid_argument("hausdorff95: undefined for an empty mask (pred fg=" +
                                std::to_string(pred.foreground_count()) + ", gt fg=" +
                                std::to_string(gt.foreground_count()) + ")");
  const int H = pred.height, W = pred.width;
  const auto bp = boundary4(pred);
  const auto bg = boundary4(gt);
  const auto dt_to_g = dist::euclidean_sq(bg, H, W);
  const auto dt_to_p = dist::euclidean_sq(bp, H, W);

  std::vector<double> pooled;
  for (size_t i = 0; i < bp.size(); ++i)
    if (bp[i]) pooled.push_back(std::sqrt(static_cast<double>(dt_to_g[i])));
  for (size_t i = 0; i < bg.size(); ++i)
    if (bg[i]) pooled.push_back(std::sqrt(static_cast<double>(dt_to_p[i])));

  std::sort(pooled.begin(), pooled.end());
  const size_t n = pooled.size();
  const size_t rank = (95 * n + 99) / 100;  // nearest-rank: ceil(0.95*n), 1-based
  return pooled[rank - 1];
}

double s_score(const std::array<double, 3>& dice_percent,
               const std::array<double, 3>& hausdorff_px) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += dice_percent[size_t(c)] / 200.0 - hausdorff_px[size_t(c)] / 60.0;
  return s;
}

double euclidean_distance(double px, double py, double gx, double gy) {
  return std::hypot(px - gx, py - gy);
}

void EvalReport::recompute_s() {
  if (dice.size() != hausdorff95.size())
    throw std::invalid_argument("EvalReport: " + std::to_string(dice.size()) +
                                " dice classes vs " + std::to_string(hausdorff95.size()) +
                                " hausdorff classes");
  s = 0.0;
  for (size_t c = 0; c < dice.size(); ++c)
    s += dice[c] * 100.0 / 200.0 - hausdorff95[c] / 60.0;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["dice"] = dice;
  j["hausdorff95"] = hausdorff95;
  j["s"] = s;
  j["ed"] = ed;
  j["n"] = n;
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  EvalReport r;
  r.dice = j.at("dice").get<std::vector<double>>();
  r.hausdorff95 = j.at("hausdorff95").get<std::vector<double>>();
  r.s = j.at("s").get<double>();
  r.ed = j.at("ed").get<double>();
  r.n = j.at("n").get<int64_t>();
  return r;
}

}  // namespace attnet::metrics
