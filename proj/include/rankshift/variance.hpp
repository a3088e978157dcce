// Window-count estimators of the integrated squared density of the control
// response (or its regression residual), and the analytic confidence
// intervals for the rank-based shift estimators built from them.
#pragma once

#include <cstdint>
#include <vector>

#include "rankshift/design.hpp"
#include "rankshift/estimators.hpp"

namespace rankshift {

// Window-width exponent: pair differences are counted inside [0, N^-nu).
// Consistency holds on (0, 1/2); the default is 1/3.
struct NuConfig {
  double nu = 1.0 / 3.0;

  NuConfig() = default;
  explicit NuConfig(double value);
};

struct DensityFunctionalEstimate {
  enum class Kind { controls, plugin, adjusted };

  double value = 0.0;
  Kind kind = Kind::controls;
  std::size_t n_used = 0;       // observations entering the pair count
  bool degenerate_ties = false;  // all inputs identical: value is pure tie mass
};

// Ordered pairs (i, j), including i = j, with 0 <= values[j] - values[i] <
// width. Sort plus two-pointer sweep; the comparisons use the same
// floating-point expression as the literal double loop, so the count is
// bit-identical to it. The functional estimators below subtract the n
// diagonal pairs, which fire unconditionally. Exposed for tests.
std::uint64_t count_window_pairs(std::vector<double> values, double width);

// Control observations only, i != j, window N^-1/2, scaled by
// (1 - m/N)^-2 N^-3/2. Needs at least two controls.
DensityFunctionalEstimate density_functional_controls(const Experiment& exp);

// All units after removing the estimated shift from the treated arm
// (b_j = y_j - tau_hat z_j), distinct pairs only, window N^-nu, scaled by
// N^-(2-nu).
DensityFunctionalEstimate density_functional_plugin(const Experiment& exp, double tau_hat,
                                                    NuConfig nu = {});

// Same count on the residuals of b on [1, x]; estimates the density
// functional of the covariate-adjusted response. Requires exp.x.
DensityFunctionalEstimate density_functional_adjusted(const Experiment& exp, double tau_hat,
                                                      NuConfig nu = {});

// Interval point +- z_{alpha/2} / sqrt(N) * (12 (m/N)(1 - m/N) value^2)^-1/2.
// Throws NumericError when the functional is zero (interval undefined).
ConfidenceInterval rank_ci(double point, const DensityFunctionalEstimate& functional,
                           std::size_t n, std::size_t m, double level);

// Standard error (12 (m/N)(1 - m/N) value^2 N)^-1/2 implied by the normal
// limit of the rank estimators; rank_ci's half-width is z_{alpha/2} times this.
double standard_error_from_functional(const DensityFunctionalEstimate& functional,
                                      std::size_t n, std::size_t m);

// Wald interval point +- z_{alpha/2} * se for the mean-based estimators.
ConfidenceInterval normal_ci(double point, double se, double level);

}  // namespace rankshift
