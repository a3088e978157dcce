// Randomization tests over the assignment distribution, test-inversion
// confidence intervals, and the exact local-shift decomposition identity of
// the rank-sum statistic.
#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "rankshift/design.hpp"
#include "rankshift/estimators.hpp"
#include "rankshift/ranks.hpp"

namespace rankshift {

// Which statistic the test randomizes.
enum class StatKind { rank_sum, diff_means, adjusted_rank_sum };

enum class Sided { two_sided, left, right };

struct NullDistribution {
  std::vector<double> values;  // sorted ascending, one per assignment
  AssignmentSpace space;
};

// I(x) = 1{0 <= x < h/sqrt(N)} for h >= 0, and -1{h/sqrt(N) <= x < 0} for
// h < 0: the signed indicator of a local shift moving x across zero.
struct LocalShiftIndicator {
  double h = 0.0;
  std::size_t n = 0;

  double window() const;
  double operator()(double x) const;
};

struct TauGrid {
  double lo = 0.0;
  double hi = 0.0;
  int points = 513;
};

// Distribution of the statistic when the assignment is re-randomized with the
// shifted responses held fixed: each assignment z' is scored on responses
// (y - tau0 z) + tau0 z'.
NullDistribution null_distribution(const Experiment& exp, double tau0, StatKind stat,
                                   const AssignmentSpace& space,
                                   TiePolicy policy = TiePolicy::up());

// The same functional evaluated at the experiment's own assignment, computed
// through the identical code path as null_distribution so ties against the
// null values are exact.
double observed_statistic(const Experiment& exp, double tau0, StatKind stat,
                          TiePolicy policy = TiePolicy::up());

// Ties count inclusively on both sides; two-sided doubles the smaller tail
// and caps at 1.
double p_value(const NullDistribution& dist, double observed, Sided sided);

// Smallest and largest tau0 the randomization test keeps at the given level,
// located on the grid and sharpened by bisection at the two edges. The
// default grid spans the difference in means +- 6 of its standard errors.
// Both grid endpoints must be rejected, otherwise the grid is too narrow.
ConfidenceInterval test_inversion_ci(const Experiment& exp, StatKind stat,
                                     const AssignmentSpace& space, double level,
                                     std::optional<TauGrid> grid = std::nullopt,
                                     TiePolicy policy = TiePolicy::up());

// Exact check of the local-shift decomposition: over all C(N, m) assignments,
// the rank-sum statistic of b - h/sqrt(N) * z equals in distribution the
// rank-sum statistic of b minus the cross-pair indicator count
// gamma(z) = sum_{i != j} (1 - z_i) z_j I(b_j - b_i). Returns the two sorted
// value multisets (left: shifted statistic; right: decomposed form).
std::pair<std::vector<double>, std::vector<double>> decomposition_check(
    const std::vector<double>& b, std::size_t m, double h);

}  // namespace rankshift
