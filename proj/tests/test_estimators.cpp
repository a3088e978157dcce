#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "rankshift/common.hpp"
#include "rankshift/design.hpp"
#include "rankshift/estimators.hpp"
#include "rankshift/rng.hpp"
#include "rankshift/variance.hpp"

using namespace rankshift;

namespace {

Eigen::MatrixXd column(const std::vector<double>& v) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = v[i];
  return x;
}

}  // namespace

TEST_CASE("difference in means on small examples") {
  const Estimate a = diff_in_means(Experiment({5, 1, 7, 3}, {1, 0, 1, 0}));
  CHECK(a.point == 4.0);
  REQUIRE(a.se.has_value());
  // s1^2 = s0^2 = 2, so se = sqrt(2/2 + 2/2) = sqrt(2)
  CHECK(*a.se == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  const Estimate b = diff_in_means(Experiment({1, 2, 3, 4, 5, 6}, {1, 1, 1, 0, 0, 0}));
  CHECK(b.point == -3.0);

  const Estimate c = diff_in_means(Experiment({2, 2, 2, 2}, {0, 1, 0, 1}));
  CHECK(c.point == 0.0);
  REQUIRE(c.se.has_value());
  CHECK(*c.se == 0.0);

  // A one-unit arm has no within-arm variance to estimate.
  const Estimate d = diff_in_means(Experiment({1, 2, 3}, {1, 0, 0}));
  CHECK(d.point == doctest::Approx(-1.5));
  CHECK_FALSE(d.se.has_value());
}

TEST_CASE("pairwise-difference median estimator") {
  const Estimate a = rank_unadjusted(Experiment({5, 7, 1, 2}, {1, 1, 0, 0}));
  // differences {4, 3, 6, 5}, median of the sorted middle pair (4, 5)
  CHECK(a.point == 4.5);
  CHECK(a.diagnostics.at("pairs") == 4);

  const Estimate b = rank_unadjusted(Experiment({10, 1, 2, 3}, {1, 0, 0, 0}));
  CHECK(b.point == 8.0);  // odd count {9, 8, 7}

  // Constant control response makes every difference equal the effect.
  const Estimate c = rank_unadjusted(Experiment({4, 4, 4 + 0.7, 4 + 0.7}, {0, 0, 1, 1}));
  CHECK(c.point == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("least squares fit: centering, perfect fit, pivoting") {
  Eigen::MatrixXd empty(3, 0);
  const LeastSquaresFit center = ols_fit({1, 2, 3}, empty, true);
  REQUIRE(center.residuals.size() == 3);
  CHECK(center.residuals[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(center.residuals[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(center.residuals[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(center.rank == 1);

  Rng rng(3);
  const std::size_t n = 40;
  std::vector<double> xs(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = rng.uniform(-2.0, 2.0);
    y[i] = 5.0 - 3.0 * xs[i];
  }
  const LeastSquaresFit exact = ols_fit(y, column(xs), true);
  for (double r : exact.residuals) CHECK(std::abs(r) < 1e-9 * 5.0);

  // Duplicating a column must not change rank or residuals.
  Eigen::MatrixXd dup(static_cast<Eigen::Index>(n), 2);
  dup.col(0) = column(xs).col(0);
  dup.col(1) = column(xs).col(0);
  std::vector<double> noisy(n);
  for (std::size_t i = 0; i < n; ++i) noisy[i] = y[i] + ((i % 3) - 1.0) * 0.25;
  const LeastSquaresFit lhs = ols_fit(noisy, column(xs), true);
  const LeastSquaresFit rhs = ols_fit(noisy, dup, true);
  CHECK(lhs.rank == 2);
  CHECK(rhs.rank == 2);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(rhs.residuals[i] == doctest::Approx(lhs.residuals[i]).epsilon(1e-10));
  }
}

TEST_CASE("least squares invariants: leverage bounds and orthogonality") {
  Rng rng(17);
  const std::size_t n = 25;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(static_cast<Eigen::Index>(i), 0) = rng.normal();
    x(static_cast<Eigen::Index>(i), 1) = rng.uniform(0.0, 3.0);
    y[i] = rng.normal() + x(static_cast<Eigen::Index>(i), 0);
  }
  const LeastSquaresFit fit = ols_fit(y, x, true);
  double lev_sum = 0.0;
  for (double h : fit.hat_diag) {
    CHECK(h >= 0.0);
    CHECK(h <= 1.0 + 1e-12);
    lev_sum += h;
  }
  CHECK(lev_sum == doctest::Approx(static_cast<double>(fit.rank)).epsilon(1e-10));

  // Residuals are orthogonal to the intercept and both covariate columns.
  double dot0 = 0.0, dot1 = 0.0, dot2 = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot0 += fit.residuals[i];
    dot1 += fit.residuals[i] * x(static_cast<Eigen::Index>(i), 0);
    dot2 += fit.residuals[i] * x(static_cast<Eigen::Index>(i), 1);
    scale += std::abs(y[i]);
  }
  CHECK(std::abs(dot0) < 1e-8 * scale);
  CHECK(std::abs(dot1) < 1e-8 * scale);
  CHECK(std::abs(dot2) < 1e-8 * scale);
}

TEST_CASE("adjusted rank statistic: reduction, distinct ranks, degenerate fit") {
  Rng rng(8);
  const std::size_t n = 14, m = 7;
  std::vector<double> y(n);
  std::vector<int> z = draw_assignment(n, m, rng);
  for (std::size_t i = 0; i < n; ++i) y[i] = rng.normal() + 1.5 * z[i];

  // Intercept-only covariates only shift the responses, preserving ranks.
  Experiment with_const(y, z, Eigen::MatrixXd(n, 0));
  Experiment plain(y, z);
  const auto [stat, mean] = adjusted_rank_stat(with_const, 0.4);
  CHECK(stat == wrs_statistic(plain, 0.4));
  CHECK(mean == doctest::Approx(m * (n + 1) / 2.0).epsilon(1e-12));  // distinct residuals

  // Exact linear model: all residuals tie at zero, every rank is N.
  std::vector<double> xs(n), lin(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = rng.uniform(-1.0, 1.0);
    lin[i] = 2.0 * xs[i] - 1.0 + 0.5 * z[i];
  }
  Experiment degenerate(lin, z, column(xs));
  const auto [dstat, dmean] = adjusted_rank_stat(degenerate, 0.5);
  CHECK(dstat == static_cast<double>(m * n));
  CHECK(dmean == static_cast<double>(m * n));
}

TEST_CASE("covariate-adjusted estimator recovers a noiseless linear effect") {
  const std::vector<double> xs = {0.1, 0.9, 0.3, 0.55, 0.7, 0.2, 0.85, 0.4};
  const std::vector<int> z = {1, 0, 1, 0, 1, 0, 1, 0};
  std::vector<double> y(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) y[i] = 3.0 * xs[i] + 2.0 * z[i];
  const Estimate est = rank_adjusted(Experiment(y, z, column(xs)));
  CHECK(est.point == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(est.diagnostics.at("monotone_scan") == 1.0);
}

TEST_CASE("covariate-adjusted estimator reduces to the unadjusted one") {
  Rng rng(21);
  const std::size_t n = 30, m = 15;
  std::vector<double> y(n);
  const std::vector<int> z = draw_assignment(n, m, rng);
  for (std::size_t i = 0; i < n; ++i) y[i] = rng.t3() + 2.0 * z[i];
  const Estimate adj = rank_adjusted(Experiment(y, z, Eigen::MatrixXd(n, 0)));
  const Estimate unadj = rank_unadjusted(Experiment(y, z));
  CHECK(adj.point == doctest::Approx(unadj.point).epsilon(1e-6));
}

TEST_CASE("covariate-adjusted estimator on a correctly specified model") {
  // One draw of the linear design the interval calculations target:
  // x uniform on (-4,4), response 3x + noise + 2z, half the units treated.
  Rng rng(123);
  const std::size_t n = 1000, m = 500;
  std::vector<double> xs(n), y(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = rng.uniform(-4.0, 4.0);
  std::vector<double> eps(n);
  for (std::size_t i = 0; i < n; ++i) eps[i] = rng.normal();
  const std::vector<int> z = draw_assignment(n, m, rng);
  for (std::size_t i = 0; i < n; ++i) y[i] = 3.0 * xs[i] + eps[i] + 2.0 * z[i];
  Experiment e(y, z, column(xs));

  const Estimate est = rank_adjusted(e);
  // Asymptotic sd of the estimator is 1/sqrt(12 * 0.25 * N) / (2 sqrt(pi))^-1.
  const double sd = 1.0 / (std::sqrt(3.0) * (1.0 / (2.0 * std::sqrt(std::acos(-1.0)))) *
                           std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(est.point - 2.0) < 3.0 * sd);

  const auto fn = density_functional_adjusted(e, est.point, NuConfig{});
  const ConfidenceInterval ci = rank_ci(est.point, fn, n, m, 0.95);
  CHECK(ci.hi - ci.lo == doctest::Approx(0.25).epsilon(0.2));
}

TEST_CASE("regression baselines agree with the two-sample mean on orthogonal designs") {
  Rng rng(5);
  const std::size_t n = 24, m = 12;
  const std::vector<int> z = draw_assignment(n, m, rng);
  std::vector<double> xs(n), y(n);
  // Covariate unrelated to both response and assignment, and balanced to
  // machine precision between arms: center it within each arm.
  for (std::size_t i = 0; i < n; ++i) xs[i] = rng.normal();
  double mean1 = 0.0, mean0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) (z[i] ? mean1 : mean0) += xs[i];
  mean1 /= m;
  mean0 /= (n - m);
  for (std::size_t i = 0; i < n; ++i) xs[i] -= z[i] ? mean1 : mean0;
  for (std::size_t i = 0; i < n; ++i) y[i] = 3.0 * z[i] + ((i % 5) - 2.0) * 0.3;

  Experiment e(y, z, column(xs));
  const double dm = diff_in_means(e).point;
  CHECK(ols_adjusted(e).point == doctest::Approx(dm).epsilon(1e-9));
  CHECK(lin_interaction(e).point == doctest::Approx(ols_adjusted(e).point).epsilon(1e-9));

  // Intercept-only adjustment is exactly the two-sample mean difference.
  Experiment e0(y, z, Eigen::MatrixXd(n, 0));
  CHECK(ols_adjusted(e0).point == doctest::Approx(dm).epsilon(1e-12));
}

TEST_CASE("regression baselines on noiseless models") {
  const std::vector<int> z = {1, 0, 0, 1, 1, 0};
  const std::vector<double> xs = {1.5, -0.5, 0.25, -1.0, 0.75, 2.0};
  std::vector<double> y(6);
  for (std::size_t i = 0; i < 6; ++i) y[i] = 2.0 * z[i] + 3.0 * xs[i];
  const Estimate a = ols_adjusted(Experiment(y, z, column(xs)));
  CHECK(a.point == doctest::Approx(2.0).epsilon(1e-10));
  REQUIRE(a.se.has_value());
  CHECK(*a.se < 1e-9);

  // Interaction model: y = 2z + xc + z*xc with xc already centered.
  std::vector<double> xc(xs);
  double mu = 0.0;
  for (double v : xc) mu += v;
  mu /= 6.0;
  for (double& v : xc) v -= mu;
  std::vector<double> yi(6);
  for (std::size_t i = 0; i < 6; ++i) yi[i] = 2.0 * z[i] + xc[i] + z[i] * xc[i];
  const Estimate b = lin_interaction(Experiment(yi, z, column(xc)));
  CHECK(b.point == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("shift and scale equivariance of every estimator") {
  Rng rng(31);
  const std::size_t n = 26, m = 13;
  const std::vector<int> z = draw_assignment(n, m, rng);
  std::vector<double> xs(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = rng.uniform(-1.0, 1.0);
    y[i] = rng.normal() + 0.8 * xs[i] + 1.2 * z[i];
  }
  const Experiment base(y, z, column(xs));

  auto points = [&](const Experiment& e) {
    return std::vector<double>{diff_in_means(e).point, rank_unadjusted(e).point,
                               rank_adjusted(e).point, ols_adjusted(e).point,
                               lin_interaction(e).point};
  };
  const std::vector<double> p0 = points(base);

  std::vector<double> shifted(y), bumped(y), scaled(y);
  for (std::size_t i = 0; i < n; ++i) {
    shifted[i] += 5.0;
    bumped[i] += 2.5 * z[i];
    scaled[i] *= 3.0;
  }
  const std::vector<double> ps = points(Experiment(shifted, z, column(xs)));
  const std::vector<double> pb = points(Experiment(bumped, z, column(xs)));
  const std::vector<double> pk = points(Experiment(scaled, z, column(xs)));
  for (std::size_t k = 0; k < p0.size(); ++k) {
    const double tol = k == 2 ? 1e-6 : 1e-9;  // inversion solver tolerance
    CHECK(std::abs(ps[k] - p0[k]) < tol);
    CHECK(std::abs(pb[k] - (p0[k] + 2.5)) < tol);
    CHECK(std::abs(pk[k] - 3.0 * p0[k]) < 3.0 * tol);
  }
}

TEST_CASE("corruption bounds: rank point stays in range, mean point explodes") {
  Rng rng(55);
  const std::size_t n = 20, m = 10;
  const std::vector<int> z = draw_assignment(n, m, rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = rng.uniform(0.0, 4.0) + 1.0 * z[i];

  // Finite breakdown count here is 5 of 20; corrupt three, comfortably below.
  std::vector<double> dirty(y);
  int corrupted = 0;
  for (std::size_t i = 0; i < n && corrupted < 3; ++i) {
    if (z[i]) {
      dirty[i] = 1e9;
      ++corrupted;
    }
  }
  const double clean_lo = -4.0, clean_hi = 5.0;  // conservative envelope of y ranges
  const double pt = rank_unadjusted(Experiment(dirty, z)).point;
  CHECK(pt >= clean_lo);
  CHECK(pt <= clean_hi);

  std::vector<double> one_bad(y);
  for (std::size_t i = 0; i < n; ++i) {
    if (z[i]) {
      one_bad[i] = 1e9;
      break;
    }
  }
  CHECK(std::abs(diff_in_means(Experiment(one_bad, z)).point) > 1e6);
}

TEST_CASE("estimator error paths") {
  const std::vector<double> y{1, 2, 3, 4};
  const std::vector<int> z{1, 0, 1, 0};
  CHECK_THROWS_AS(rank_adjusted(Experiment(y, z)), InvalidInput);
  CHECK_THROWS_AS(ols_adjusted(Experiment(y, z)), InvalidInput);
  CHECK_THROWS_AS(lin_interaction(Experiment(y, z)), InvalidInput);

  // Covariate equal to the treatment indicator defeats the regression.
  const std::vector<double> zx{1, 0, 1, 0};
  CHECK_THROWS_AS(ols_adjusted(Experiment(y, z, column(zx))), NumericError);
}
