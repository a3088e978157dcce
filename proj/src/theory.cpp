#include "rankshift/theory.hpp"

#include <cmath>
#include <limits>

#include <boost/math/constants/constants.hpp>
#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/laplace.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/pareto.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/distributions/uniform.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rankshift/common.hpp"

namespace rankshift {

namespace {

constexpr double kDensityCut = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;

double integrate_checked(const std::function<double(double)>& f, double a, double b,
                         const char* what) {
  double error = 0.0;
  double result = 0.0;
  try {
    result = Quad::integrate(f, a, b, 15, 1e-10, &error);
  } catch (const std::exception&) {
    throw NumericError(std::string(what) + ": quadrature failed to converge");
  }
  if (!std::isfinite(result) || error > 1e-6 * std::max(1.0, std::abs(result))) {
    throw NumericError(std::string(what) + ": quadrature failed to converge");
  }
  return result;
}

// Walk outward from `from` in direction `dir` until the density drops below
// the cut, then bisect onto the boundary. The density is assumed to decay
// monotonically in the tail.
double density_cut_point(const DensitySpec& spec, double from, double dir) {
  double step = 1.0;
  double inside = from;
  double outside = from + dir * step;
  int tries = 0;
  while (spec.pdf(outside) >= kDensityCut) {
    inside = outside;
    step *= 2.0;
    outside = from + dir * step;
    if (++tries > 200) {
      throw NumericError("density tail does not fall below the truncation cut");
    }
  }
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (inside + outside);
    (spec.pdf(mid) >= kDensityCut ? inside : outside) = mid;
  }
  return outside;
}

}  // namespace

DensitySpec DensitySpec::normal() {
  DensitySpec s;
  s.family_ = Family::normal;
  s.pdf_ = [](double x) {
    return boost::math::pdf(boost::math::normal_distribution<double>(), x);
  };
  s.lo_ = -kInf;
  s.hi_ = kInf;
  return s;
}

DensitySpec DensitySpec::uniform() {
  DensitySpec s;
  s.family_ = Family::uniform;
  s.pdf_ = [](double x) {
    return boost::math::pdf(boost::math::uniform_distribution<double>(0.0, 1.0), x);
  };
  s.lo_ = 0.0;
  s.hi_ = 1.0;
  return s;
}

DensitySpec DensitySpec::laplace() {
  DensitySpec s;
  s.family_ = Family::laplace;
  s.pdf_ = [](double x) {
    return boost::math::pdf(boost::math::laplace_distribution<double>(), x);
  };
  s.lo_ = -kInf;
  s.hi_ = kInf;
  return s;
}

DensitySpec DensitySpec::student_t(double df) {
  if (!(df > 0.0)) throw InvalidInput("student_t: degrees of freedom must be positive");
  DensitySpec s;
  s.family_ = Family::student_t;
  s.param_ = df;
  s.pdf_ = [df](double x) {
    return boost::math::pdf(boost::math::students_t_distribution<double>(df), x);
  };
  s.lo_ = -kInf;
  s.hi_ = kInf;
  return s;
}

DensitySpec DensitySpec::exponential() {
  DensitySpec s;
  s.family_ = Family::exponential;
  s.pdf_ = [](double x) {
    return x < 0.0 ? 0.0
                   : boost::math::pdf(boost::math::exponential_distribution<double>(1.0), x);
  };
  s.lo_ = 0.0;
  s.hi_ = kInf;
  return s;
}

DensitySpec DensitySpec::pareto(double alpha) {
  if (!(alpha > 0.0)) throw InvalidInput("pareto: shape must be positive");
  DensitySpec s;
  s.family_ = Family::pareto;
  s.param_ = alpha;
  s.pdf_ = [alpha](double x) {
    return x < 1.0 ? 0.0
                   : boost::math::pdf(boost::math::pareto_distribution<double>(1.0, alpha), x);
  };
  s.lo_ = 1.0;
  s.hi_ = kInf;
  return s;
}

DensitySpec DensitySpec::custom(std::function<double(double)> pdf, double lo, double hi) {
  if (!pdf) throw InvalidInput("custom density: callable required");
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
    throw InvalidInput("custom density: support must be a finite interval");
  }
  for (int k = 0; k <= 1000; ++k) {
    const double x = lo + (hi - lo) * static_cast<double>(k) / 1000.0;
    if (!(pdf(x) >= 0.0)) throw InvalidInput("custom density: negative or non-finite value");
  }
  const double mass =
      integrate_checked([&](double x) { return pdf(x); }, lo, hi, "custom density mass");
  if (std::abs(mass - 1.0) > 1e-6) {
    throw InvalidInput("custom density: mass on the declared support is not 1");
  }

  DensitySpec s;
  s.family_ = Family::custom;
  s.pdf_ = std::move(pdf);
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

double DensitySpec::pdf(double x) const { return pdf_(x); }

double breakdown_point_asymptotic(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw InvalidInput("breakdown_point_asymptotic: fraction must lie in [0, 1]");
  }
  if (lambda < 1.0 / 3.0) return (1.0 - lambda) / 2.0;
  if (lambda > 2.0 / 3.0) return lambda / 2.0;
  return 1.0 - std::sqrt(2.0 * lambda * (1.0 - lambda));
}

double breakdown_point_finite(std::size_t n, std::size_t m) {
  if (n < 2 || m < 1 || m > n - 1) {
    throw InvalidInput("breakdown_point_finite: m must be in [1, n-1]");
  }
  const double nn = static_cast<double>(n);
  if (3 * m > 2 * n) {
    return std::ceil(static_cast<double>(m) / 2.0) / nn;
  }
  if (3 * m < n) {
    return std::ceil(static_cast<double>(n - m) / 2.0) / nn;
  }
  const double frac = static_cast<double>(m) / nn;
  const double inner = nn * (1.0 - std::sqrt(2.0 * frac * (1.0 - frac)));
  // Nudge before flooring: boundary fractions land on integers up to rounding.
  return std::floor(inner + 1e-9 * nn) / nn;
}

double are_closed_form(const DensitySpec& spec) {
  const double pi = boost::math::constants::pi<double>();
  switch (spec.family()) {
    case DensitySpec::Family::normal:
      return 3.0 / pi;
    case DensitySpec::Family::uniform:
      return 1.0;
    case DensitySpec::Family::laplace:
      return 1.5;
    case DensitySpec::Family::student_t:
      if (spec.param() == 3.0) return 75.0 / (4.0 * pi * pi);
      throw InvalidInput("are_closed_form: no tabulated value for this t family");
    case DensitySpec::Family::exponential:
      return 3.0;
    case DensitySpec::Family::pareto: {
      const double a = spec.param();
      if (a <= 2.0) return kInf;
      return std::pow(a, 5.0) / ((a - 1.0) * (a - 1.0) * (2.0 * a + 1.0) * (2.0 * a + 1.0) *
                                 (a - 2.0));
    }
    case DensitySpec::Family::custom:
      throw InvalidInput("are_closed_form: custom densities have no tabulated value");
  }
  throw InvalidInput("are_closed_form: unknown family");
}

double are_numeric(const DensitySpec& spec) {
  const double lo = spec.support_lo();
  const double hi = spec.support_hi();

  // Moments over the full support: truncation is not safe here because x^2
  // amplifies tails far beyond the density cut.
  const double mean = integrate_checked([&](double x) { return x * spec.pdf(x); }, lo, hi,
                                        "first moment");
  const double second = integrate_checked([&](double x) { return x * x * spec.pdf(x); }, lo,
                                          hi, "second moment");
  const double var = second - mean * mean;
  if (!(var > 0.0) || !std::isfinite(var)) {
    throw NumericError("are_numeric: variance is not positive and finite");
  }

  // The squared density is integrated on a truncated window; the truncated
  // tail mass is below the cut times the tail probability.
  const double cut_lo = std::isfinite(lo) ? lo : density_cut_point(spec, mean, -1.0);
  const double cut_hi = std::isfinite(hi) ? hi : density_cut_point(spec, mean, 1.0);
  const double fsq = integrate_checked(
      [&](double x) {
        const double f = spec.pdf(x);
        return f * f;
      },
      cut_lo, cut_hi, "squared density");

  return 12.0 * var * fsq * fsq;
}

double pilot_efficiency_estimate(const std::vector<double>& pilot_controls, NuConfig nu) {
  if (pilot_controls.size() < 10) {
    throw InvalidInput("pilot_efficiency_estimate: need at least 10 pilot observations");
  }
  require_finite(pilot_controls, "pilot observations");
  const double s2 = sample_variance(pilot_controls);
  if (s2 == 0.0) return 0.0;

  const double nn = static_cast<double>(pilot_controls.size());
  // Distinct pairs only, matching the density functional estimators: the
  // diagonal fires unconditionally and would swamp a small pilot.
  const std::uint64_t count =
      count_window_pairs(pilot_controls, std::pow(nn, -nu.nu)) - pilot_controls.size();
  const double functional = std::pow(nn, nu.nu - 2.0) * static_cast<double>(count);
  return 12.0 * s2 * functional * functional;
}

}  // namespace rankshift
