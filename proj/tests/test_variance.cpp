#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "rankshift/common.hpp"
#include "rankshift/design.hpp"
#include "rankshift/rng.hpp"
#include "rankshift/variance.hpp"

using namespace rankshift;

namespace {

// Literal reference for the pair count, diagonal included. The production
// two-pointer sweep must match this bit for bit, so the comparison below uses
// the same floating-point expression.
std::uint64_t count_by_double_loop(const std::vector<double>& values, double width) {
  std::uint64_t count = 0;
  for (double vi : values) {
    for (double vj : values) {
      const double diff = vj - vi;
      if (diff >= 0.0 && diff < width) ++count;
    }
  }
  return count;
}

Eigen::MatrixXd no_covariates(std::size_t n) {
  return Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0);
}

std::vector<int> alternating(std::size_t n) {
  std::vector<int> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (i % 2 == 0) ? 1 : 0;
  return z;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("window pair count on hand-checkable inputs") {
  // Two diagonal pairs plus the one upward pair 0 -> 0.3.
  CHECK(count_window_pairs({0.0, 0.3}, 0.5) == 3);
  // A single value pairs only with itself.
  CHECK(count_window_pairs({7.0}, 0.1) == 1);
  // All tied: every ordered pair lands in the window.
  CHECK(count_window_pairs({2.0, 2.0, 2.0, 2.0, 2.0}, 1e-9) == 25);
  // Gaps of 1 with a window of 0.5: diagonal only.
  CHECK(count_window_pairs({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 0.5) == 10);
  // The window is half-open, so a difference equal to the width is out,
  // and a zero width excludes even the diagonal.
  CHECK(count_window_pairs({0.0, 0.5}, 0.5) == 2);
  CHECK(count_window_pairs({1.0, 1.0, 2.0}, 0.0) == 0);
  CHECK_THROWS_AS(count_window_pairs({0.0, std::numeric_limits<double>::quiet_NaN()}, 0.5),
                  InvalidInput);
}

TEST_CASE("window pair count matches the literal double loop") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.below(120));
    std::vector<double> values(n);
    double width = 0.0;
    switch (trial % 3) {
      case 0:  // continuous values, continuous width
        for (double& v : values) v = rng.uniform(-3.0, 3.0);
        width = rng.uniform(0.0, 2.0);
        break;
      case 1:  // lattice values and width, so ties and exact boundary hits occur
        for (double& v : values) v = static_cast<double>(rng.below(49)) / 8.0 - 3.0;
        width = static_cast<double>(1 + rng.below(16)) / 8.0;
        break;
      default:  // heavy duplication
        for (double& v : values) v = static_cast<double>(rng.below(4));
        width = rng.uniform(0.0, 3.0);
        break;
    }
    CAPTURE(trial);
    CHECK(count_window_pairs(values, width) == count_by_double_loop(values, width));
  }
}

TEST_CASE("control-arm density functional on frozen examples") {
  // Controls {0, 0.3}, window 1/sqrt(4) = 0.5, one qualifying distinct pair,
  // prefactor (1/2)^-2 * 4^-3/2 = 0.5.
  const Experiment exp({4.0, 9.0, 0.0, 0.3}, {1, 1, 0, 0});
  const DensityFunctionalEstimate est = density_functional_controls(exp);
  CHECK(est.value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(est.kind == DensityFunctionalEstimate::Kind::controls);
  CHECK(est.n_used == 2);
  CHECK_FALSE(est.degenerate_ties);

  // Tied controls: both off-diagonal pairs qualify.
  const DensityFunctionalEstimate tied =
      density_functional_controls(Experiment({4.0, 9.0, 1.0, 1.0}, {1, 1, 0, 0}));
  CHECK(tied.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tied.degenerate_ties);

  // One control is not enough to form a pair.
  CHECK_THROWS_AS(density_functional_controls(Experiment({4.0, 9.0, 1.0}, {1, 1, 0})),
                  InvalidInput);
}

TEST_CASE("plug-in density functional counts distinct pairs only") {
  // Values 1 apart with a window of 10^-1/3 < 1: nothing but the diagonal
  // fires, and the diagonal does not count.
  const std::vector<double> spread{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const Experiment far(spread, alternating(10));
  const DensityFunctionalEstimate zero = density_functional_plugin(far, 0.0);
  CHECK(zero.value == 0.0);
  CHECK_FALSE(zero.degenerate_ties);
  CHECK(zero.n_used == 10);

  // All responses tied after removing the shift: n^2 - n qualifying pairs,
  // value n^nu - n^(nu-1).
  std::vector<double> y(16, 0.25);
  const std::vector<int> z = alternating(16);
  for (std::size_t i = 0; i < 16; ++i) y[i] += 1.5 * z[i];
  const DensityFunctionalEstimate tied = density_functional_plugin(Experiment(y, z), 1.5);
  const double expected = std::pow(16.0, 1.0 / 3.0) - std::pow(16.0, 1.0 / 3.0) / 16.0;
  CHECK(tied.value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(tied.degenerate_ties);

  // Hand count: {0, 0.1, 0.2, 5} with window 4^-1/3 = 0.63 has exactly the
  // three upward pairs inside {0, 0.1, 0.2}.
  const DensityFunctionalEstimate hand =
      density_functional_plugin(Experiment({0.0, 0.1, 0.2, 5.0}, {1, 0, 1, 0}), 0.0);
  CHECK(hand.value == doctest::Approx(3.0 * std::pow(4.0, -5.0 / 3.0)).epsilon(1e-12));

  CHECK_THROWS_AS(
      density_functional_plugin(far, std::numeric_limits<double>::infinity()), InvalidInput);
}

TEST_CASE("plug-in functional is invariant to response and shift relabeling") {
  // Values on a 1/8 lattice so every arithmetic step below is exact.
  const std::vector<double> y{0.0, 0.125, 0.375, 0.875, 1.5, 2.125, 2.75, 3.625};
  const std::vector<int> z = alternating(8);
  const double base = density_functional_plugin(Experiment(y, z), 0.25).value;

  // Adding a constant to every response moves all the differences by zero.
  std::vector<double> shifted = y;
  for (double& v : shifted) v += 4096.0;
  CHECK(density_functional_plugin(Experiment(shifted, z), 0.25).value == base);

  // Raising the treated arm and the removed shift together changes nothing.
  std::vector<double> raised = y;
  for (std::size_t i = 0; i < raised.size(); ++i) raised[i] += 1.5 * z[i];
  CHECK(density_functional_plugin(Experiment(raised, z), 0.25 + 1.5).value == base);
}

TEST_CASE("adjusted functional with no covariate columns reduces to the plug-in") {
  // Centering on the intercept shifts every residual by the same mean, so the
  // pair count is unchanged. Differences here stay at least 0.025 away from
  // the window edge of 8^-1/3 = 0.5, so solver rounding cannot flip a pair.
  const std::vector<double> y{0.0, 0.125, 0.375, 0.9, 1.45, 2.1, 2.85, 3.7};
  const std::vector<int> z = alternating(8);
  const Experiment plain(y, z);
  const Experiment with_empty(y, z, no_covariates(8));
  const double plug = density_functional_plugin(plain, 0.25).value;
  const DensityFunctionalEstimate adj = density_functional_adjusted(with_empty, 0.25);
  CHECK(adj.value == plug);
  CHECK(adj.kind == DensityFunctionalEstimate::Kind::adjusted);

  // Without a covariate matrix the adjusted estimator has nothing to fit.
  CHECK_THROWS_AS(density_functional_adjusted(plain, 0.25), InvalidInput);
}

TEST_CASE("interval and standard error from a frozen functional value") {
  DensityFunctionalEstimate f;
  f.value = 0.28209;  // integrated squared standard normal density
  f.kind = DensityFunctionalEstimate::Kind::plugin;

  const double se = standard_error_from_functional(f, 400, 200);
  CHECK(se == doctest::Approx(0.102336).epsilon(5e-4));

  const ConfidenceInterval ci = rank_ci(1.0, f, 400, 200, 0.95);
  CHECK((ci.hi - ci.lo) / 2.0 == doctest::Approx(0.200576).epsilon(5e-4));
  CHECK((ci.hi + ci.lo) / 2.0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ci.level == 0.95);

  // Wider level, wider interval; same point.
  const ConfidenceInterval wide = rank_ci(1.0, f, 400, 200, 0.99);
  CHECK(wide.hi - wide.lo > ci.hi - ci.lo);

  // A zero functional leaves the interval undefined.
  DensityFunctionalEstimate zero;
  zero.value = 0.0;
  CHECK_THROWS_AS(standard_error_from_functional(zero, 400, 200), NumericError);
  CHECK_THROWS_AS(rank_ci(0.0, zero, 400, 200, 0.95), NumericError);
}

TEST_CASE("normal interval basics") {
  const ConfidenceInterval ci = normal_ci(0.0, 1.0, 0.95);
  CHECK(ci.hi == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(ci.lo == doctest::Approx(-1.959964).epsilon(1e-6));
  CHECK_THROWS_AS(normal_ci(0.0, -1.0, 0.95), InvalidInput);
  CHECK_THROWS_AS(normal_ci(0.0, 1.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(normal_ci(0.0, 1.0, 0.0), InvalidInput);
}

TEST_CASE("window exponent must sit inside the open interval") {
  CHECK_THROWS_AS(NuConfig(0.0), InvalidInput);
  CHECK_THROWS_AS(NuConfig(0.5), InvalidInput);
  CHECK_THROWS_AS(NuConfig(-0.1), InvalidInput);
  CHECK_THROWS_AS(NuConfig(0.7), InvalidInput);
  CHECK(NuConfig(0.25).nu == 0.25);
  CHECK(NuConfig(0.49).nu == 0.49);
  CHECK(NuConfig().nu == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("the estimators agree on iid normal data and across window exponents") {
  // True integrated squared density of N(0,1) is 1/(2 sqrt(pi)) = 0.28209.
  const double truth = 0.5 / std::sqrt(M_PI);
  const std::size_t n = 2000;
  const double tau = 2.0;
  const std::vector<int> z = alternating(n);

  std::vector<double> plug_vals, ctrl_vals, nu14, nu512;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = rng.normal() + tau * z[i];
    const Experiment exp(y, z);
    plug_vals.push_back(density_functional_plugin(exp, tau).value);
    ctrl_vals.push_back(density_functional_controls(exp).value);
    nu14.push_back(density_functional_plugin(exp, tau, NuConfig(0.25)).value);
    nu512.push_back(density_functional_plugin(exp, tau, NuConfig(5.0 / 12.0)).value);
  }

  const double plug = median_of(plug_vals);
  const double ctrl = median_of(ctrl_vals);
  CHECK(plug == doctest::Approx(truth).epsilon(0.15));
  CHECK(ctrl == doctest::Approx(truth).epsilon(0.25));

  // The window exponent trades bias for variance but the target is the same.
  CHECK(median_of(nu14) == doctest::Approx(plug).epsilon(0.20));
  CHECK(median_of(nu512) == doctest::Approx(plug).epsilon(0.20));
}

TEST_CASE("covariate adjustment recovers the residual density") {
  // Response 3x + noise: the raw control responses are spread over (-12, 12)
  // and carry a small density functional, while the regression residuals are
  // standard normal and carry 1/(2 sqrt(pi)).
  const std::size_t n = 2000;
  const double tau = 2.0;
  const std::vector<int> z = alternating(n);
  Rng rng(7);
  Eigen::MatrixXd x(n, 1);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = rng.uniform(-4.0, 4.0);
    x(static_cast<Eigen::Index>(i), 0) = xi;
    y[i] = 3.0 * xi + rng.normal() + tau * z[i];
  }
  const Experiment exp(y, z, x);
  const double adj = density_functional_adjusted(exp, tau).value;
  const double plug = density_functional_plugin(exp, tau).value;
  CHECK(adj == doctest::Approx(0.5 / std::sqrt(M_PI)).epsilon(0.20));
  CHECK(adj > 3.0 * plug);
}
