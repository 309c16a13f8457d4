#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "attnet/attention.hpp"

namespace attnet::metrics {

using attention::Mask;

// 2|P∩G| / (|P|+|G|); both masks empty counts as a perfect 1 (evaluation
// convention — the loss-side dice treats empty-empty as 0).
double dice_score(const Mask& pred, const Mask& gt);

// Symmetric 95% Hausdorff distance: pool directed Euclidean distances
// between the 4-connectivity boundaries of both masks, return the
// nearest-rank 95th percentile. Throws if either mask is empty.
double hausdorff95(const Mask& pred, const Mask& gt);

// S = sum_class(dice/200 - hausdorff/60) with dice on the percent scale.
double s_score(const std::array<double, 3>& dice_percent,
               const std::array<double, 3>& hausdorff_px);

double euclidean_distance(double px, double py, double gx, double gy);

struct EvalReport {
  std::vector<double> dice;         // per class, fractional [0,1]
  std::vector<double> hausdorff95;  // per class, pixels
  double s = 0.0;
  double ed = 0.0;  // mean Euclidean distance, pixels
  int64_t n = 0;    // samples evaluated

  // s from the stored per-class columns: sum(dice*100/200 - hd/60).
  void recompute_s();
  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

}  // namespace attnet::metrics
