#pragma once

#include <functional>
#include <string>
#include <vector>

#include "attnet/rng.hpp"
#include "attnet/tensor.hpp"

// Central-difference validation of the recorded backward passes. Everything
// here runs in double: float rounding would eat most of the tolerance budget.
namespace attnet::gradcheck {

struct CheckConfig {
  double step = 1e-5;       // h = step * max(1, |x|) per coordinate
  double rel_tol = 1e-4;
  double abs_floor = 1e-6;  // |a-f| <= max(abs_floor, rel_tol*max(|a|,|f|)) passes
  int max_coords_per_tensor = 0;  // 0 = exhaustive
};

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;  // |a-f| / max(|a|,|f|,abs_floor), worst coordinate
  double max_abs_err = 0.0;
  int64_t coords_checked = 0;
  bool pass = true;
  std::string first_failure;  // empty when pass
};

// Builds a scalar loss from the given leaves; called repeatedly under
// perturbation, so it must be a pure function of the leaf values.
using ScalarFn =
    std::function<TensorPtr<double>(Graph<double>&, const std::vector<TensorPtr<double>>&)>;

// Backward once for analytic leaf gradients, then central differences over
// each leaf coordinate (strided subsample when the config caps coordinates).
CheckResult check_scalar_fn(const std::string& name, const ScalarFn& fn,
                            const std::vector<TensorPtr<double>>& inputs,
                            const CheckConfig& cfg = {}, Rng* coord_rng = nullptr);

struct SuiteResult {
  std::vector<CheckResult> results;
  bool all_pass = true;
};

// One check per differentiable op, inputs drawn from `seed`. Inputs for the
// kink-bearing ops (relu, maxpool) are kept away from their kinks, where a
// finite difference straddles two linear pieces and says nothing.
SuiteResult run_builtin_suite(uint64_t seed, const CheckConfig& cfg = {});

// Whole-network compositions on 16x16 inputs with a slimmed-down config:
// encoder -> supervision dice, encoder -> decoder -> dice, and
// encoder -> localization head -> squared error. Leaves are every parameter
// tensor plus the image; the config's coordinate cap keeps it quick.
SuiteResult run_model_suite(uint64_t seed, const CheckConfig& cfg = {});

std::string format_results(const SuiteResult& suite);

}  // namespace attnet::gradcheck
