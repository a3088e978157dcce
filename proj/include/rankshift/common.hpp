// Shared error types and small numeric helpers used across the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankshift {

// Precondition violations: bad sizes, out-of-range parameters, non-finite input.
class InvalidInput : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Numeric/statistical failures: no bracket, non-monotone statistic,
// zero variance functional, nonconvergent integral.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// File and schema problems on the CSV surface.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Unbiased sample variance (denominator n-1). Returns 0 for n < 2.
inline double sample_variance(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(n - 1);
}

// Linear-interpolation quantile on a copy of the data (the common "type 7" rule).
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw InvalidInput("quantile: empty input");
  std::sort(v.begin(), v.end());
  if (p <= 0) return v.front();
  if (p >= 1) return v.back();
  const double h = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

inline double iqr(const std::vector<double>& v) {
  return quantile(v, 0.75) - quantile(v, 0.25);
}

// Characteristic scale of a response vector, used for solver tolerances.
// IQR when positive, else the largest magnitude, else 1.
inline double scale_of(const std::vector<double>& v) {
  double s = iqr(v);
  if (s > 0) return s;
  for (double x : v) s = std::max(s, std::abs(x));
  return s > 0 ? s : 1.0;
}

inline void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw InvalidInput(std::string(what) + ": non-finite entry");
}

}  // namespace rankshift
