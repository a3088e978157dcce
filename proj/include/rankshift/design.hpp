// Finite-population experiment data model and the assignment law
// (simple random sampling without replacement of m treated units out of n).
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rankshift/rng.hpp"

namespace rankshift {

// Largest number of assignments an exact enumeration may visit by default.
inline constexpr std::uint64_t kEnumerationCap = 2'000'000;

// C(n, m), saturated at cap+1 so callers can test "fits under cap" without
// overflow for large n.
std::uint64_t binomial_capped(std::size_t n, std::size_t m, std::uint64_t cap);

// One completely randomized experiment: observed responses, 0/1 assignment
// indicators, and optional pre-treatment covariates (no intercept column; a
// matrix with zero columns is a valid "no covariates" value).
struct Experiment {
  std::vector<double> y;
  std::vector<int> z;
  std::optional<Eigen::MatrixXd> x;

  Experiment(std::vector<double> y_in, std::vector<int> z_in,
             std::optional<Eigen::MatrixXd> x_in = std::nullopt);

  std::size_t size() const { return y.size(); }
  std::size_t treated_count() const { return m_; }

private:
  std::size_t m_ = 0;
};

// The randomization law the tests and estimators condition on: either every
// one of the C(n, m) assignments, or a Monte Carlo sample of them.
struct AssignmentSpace {
  enum class Mode { exact, monte_carlo };

  std::size_t n = 0;
  std::size_t m = 0;
  Mode mode = Mode::exact;
  std::uint64_t draws = 0;  // monte_carlo only
  std::uint64_t seed = 0;   // monte_carlo only

  static AssignmentSpace exact(std::size_t n, std::size_t m,
                               std::uint64_t cap = kEnumerationCap);
  static AssignmentSpace monte_carlo(std::size_t n, std::size_t m,
                                     std::uint64_t draws, std::uint64_t seed);
};

// Draws one assignment uniformly over all (n choose m) subsets via a partial
// Fisher-Yates shuffle of indices.
std::vector<int> draw_assignment(std::size_t n, std::size_t m, Rng& rng);

// Streams the C(n, m) assignments in lexicographic order of the treated index
// set, never materializing the whole collection.
class AssignmentEnumerator {
public:
  AssignmentEnumerator(std::size_t n, std::size_t m,
                       std::uint64_t cap = kEnumerationCap);

  // Fills z with the next assignment; returns false once exhausted.
  bool next(std::vector<int>& z);

  std::uint64_t total() const { return total_; }

private:
  std::size_t n_;
  std::size_t m_;
  std::vector<std::size_t> treated_;  // current combination, increasing
  bool fresh_ = true;
  bool done_ = false;
  std::uint64_t total_;
};

// Science table under a constant additive effect: a[i] - b[i] = tau for all i.
struct PotentialOutcomes {
  std::vector<double> a;
  std::vector<double> b;
  double tau = 0.0;

  static PotentialOutcomes from_control(std::vector<double> b, double tau);
  static PotentialOutcomes from_treated(std::vector<double> a, double tau);

  // Observed responses y[i] = z[i]*a[i] + (1-z[i])*b[i].
  Experiment realize(const std::vector<int>& z,
                     std::optional<Eigen::MatrixXd> x = std::nullopt) const;
};

}  // namespace rankshift
