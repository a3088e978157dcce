// Robustness and efficiency calculators: breakdown points of the rank-based
// shift estimator, asymptotic relative efficiency versus the difference in
// means (closed-form table and numeric integration), and a pilot-sample
// efficiency estimate.
#pragma once

#include <functional>
#include <vector>

#include "rankshift/variance.hpp"

namespace rankshift {

// A response distribution, either a named family or a custom density on a
// declared finite support. Named families carry their standard
// parameterization; efficiency values are scale-invariant so that choice is
// immaterial.
class DensitySpec {
public:
  enum class Family { normal, uniform, laplace, student_t, exponential, pareto, custom };

  static DensitySpec normal();
  static DensitySpec uniform();       // on [0, 1]
  static DensitySpec laplace();       // density exp(-|x|)/2
  static DensitySpec student_t(double df);
  static DensitySpec exponential();   // rate 1 on [0, inf)
  static DensitySpec pareto(double alpha);  // density alpha x^-(alpha+1) on [1, inf)
  // pdf must be nonnegative and integrate to 1 over [lo, hi] within 1e-6.
  static DensitySpec custom(std::function<double(double)> pdf, double lo, double hi);

  Family family() const { return family_; }
  double param() const { return param_; }
  double pdf(double x) const;
  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }

private:
  DensitySpec() = default;

  Family family_ = Family::custom;
  double param_ = 0.0;
  std::function<double(double)> pdf_;
  double lo_ = 0.0;
  double hi_ = 0.0;
};

// Asymptotic breakdown point of the rank-based shift estimator when a
// fraction lambda of units is treated:
//   (1-lambda)/2            for lambda < 1/3
//   1 - sqrt(2 lambda (1-lambda))  for 1/3 <= lambda <= 2/3
//   lambda/2                for lambda > 2/3
double breakdown_point_asymptotic(double lambda);

// Finite-sample version: ceil(m/2)/N when 3m > 2N, ceil((N-m)/2)/N when
// 3m < N, floor(N (1 - sqrt(2 (m/N)(1-m/N))))/N in between.
double breakdown_point_finite(std::size_t n, std::size_t m);

// Tabulated efficiency constants for the named families; +infinity for
// pareto with alpha <= 2 (infinite variance). Throws for custom densities
// and for student_t away from 3 degrees of freedom (no tabulated value).
double are_closed_form(const DensitySpec& spec);

// Efficiency by definition, 12 * variance * (integral of f^2)^2, via adaptive
// quadrature: moments over the full support, the squared-density integral
// over the support truncated where the density falls below 1e-12. Throws
// NumericError when an integral fails to converge (infinite variance).
double are_numeric(const DensitySpec& spec);

// Efficiency estimated from pre-study control observations alone:
// 12 * sample variance * (window-count density functional)^2. Returns 0 for a
// constant pilot. Needs at least 10 observations.
double pilot_efficiency_estimate(const std::vector<double>& pilot_controls,
                                 NuConfig nu = {});

}  // namespace rankshift
