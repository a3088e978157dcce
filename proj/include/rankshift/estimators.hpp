// Point estimators for a constant additive treatment effect: difference in
// means, rank-inversion estimators (unadjusted and covariate-adjusted), and
// the mean-based regression baselines with HC2 standard errors.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rankshift/design.hpp"
#include "rankshift/ranks.hpp"

namespace rankshift {

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;
};

struct Estimate {
  double point = 0.0;
  std::optional<double> se;
  std::optional<ConfidenceInterval> ci;
  std::string method;
  std::map<std::string, double> diagnostics;
};

struct LeastSquaresFit {
  Eigen::VectorXd coefficients;   // one per design column; dropped columns get 0
  std::vector<double> residuals;
  std::vector<double> hat_diag;   // leverages, sum equals rank
  Eigen::Index rank = 0;
};

// Controls for inverting a monotone step-function estimating equation in tau.
struct InversionSolver {
  double expansion = 2.0;   // bracket growth factor per step
  double abs_tol = 0.0;     // absolute tolerance on tau; 0 means 1e-8 * scale(y)
  int max_iter = 200;
  int grid_points = 64;     // monotonicity scan resolution
};

// Least squares of responses on x (optionally with a prepended intercept
// column) via column-pivoted QR; dependent columns are dropped, their
// coefficients reported as zero.
LeastSquaresFit ols_fit(const std::vector<double>& responses, const Eigen::MatrixXd& x,
                        bool add_intercept);

// Mean(y | z=1) - mean(y | z=0), with the conservative two-sample variance
// estimate sqrt(s1^2/m + s0^2/(N-m)) when both arms have at least 2 units.
Estimate diff_in_means(const Experiment& exp);

// Median of all m(N-m) treated-minus-control differences. Equals the midpoint
// of the interval obtained by inverting the rank-sum test at its null mean.
Estimate rank_unadjusted(const Experiment& exp);

// Residuals of (y - tau*z) on [1, x]. A fit that is perfect up to rounding
// noise is snapped to the all-zero vector so downstream ranking sees the tie
// structure it represents. Requires exp.x (a zero-column matrix gives
// intercept-only adjustment).
std::vector<double> shift_residuals(const Experiment& exp, double tau);

// Rank-sum statistic of the residuals of (y - tau*z) on [1, x], together with
// its tie-aware randomization mean (m/N) * sum of residual ranks.
std::pair<double, double> adjusted_rank_stat(const Experiment& exp, double tau,
                                             TiePolicy policy = TiePolicy::up());

// Covariate-adjusted rank estimator: inverts tau -> adjusted_rank_stat(tau)
// minus its null mean, which is non-increasing in tau, via bracket expansion
// and bisection. Point = midpoint of the sup/inf crossing pair. Throws
// NumericError if a scan finds the equation non-monotone or no bracket exists.
Estimate rank_adjusted(const Experiment& exp, const InversionSolver& solver = {},
                       TiePolicy policy = TiePolicy::up());

// Coefficient of z in least squares of y on [1, z, x], with HC2 standard
// error. Requires exp.x.
Estimate ols_adjusted(const Experiment& exp);

// Coefficient of z in least squares of y on [1, z, xc, z*xc] with xc the
// column-centered covariates, with HC2 standard error. Requires exp.x.
Estimate lin_interaction(const Experiment& exp);

}  // namespace rankshift
