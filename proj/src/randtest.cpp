#include "rankshift/randtest.hpp"

#include <algorithm>
#include <cmath>

#include "rankshift/common.hpp"
#include "rankshift/rng.hpp"

namespace rankshift {

namespace {

// Every supported statistic is affine in the treated-group sum of fixed
// per-unit scores once the shifted responses are held fixed, so one score
// vector serves the whole assignment loop.
struct StatEvaluator {
  std::vector<double> scores;
  double alpha = 1.0;
  double beta = 0.0;

  double operator()(const std::vector<int>& z) const {
    double s = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (z[i]) s += scores[i];
    }
    return alpha * s + beta;
  }
};

StatEvaluator make_evaluator(const Experiment& exp, double tau0, StatKind stat,
                             TiePolicy policy) {
  if (!std::isfinite(tau0)) throw InvalidInput("randomization test: shift must be finite");
  const std::size_t n = exp.size();
  const std::size_t m = exp.treated_count();

  StatEvaluator ev;
  switch (stat) {
    case StatKind::rank_sum: {
      std::vector<double> b(n);
      for (std::size_t i = 0; i < n; ++i) {
        b[i] = exp.y[i] - tau0 * static_cast<double>(exp.z[i]);
      }
      ev.scores = rank(b, policy).ranks;
      break;
    }
    case StatKind::adjusted_rank_sum: {
      ev.scores = rank(shift_residuals(exp, tau0), policy).ranks;
      break;
    }
    case StatKind::diff_means: {
      // mean(y'|z'=1) - mean(y'|z'=0) at y' = b + tau0 z' reduces to
      // S_t * N/(m(N-m)) - S/(N-m) + tau0 with S_t the treated sum of b.
      ev.scores.resize(n);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        ev.scores[i] = exp.y[i] - tau0 * static_cast<double>(exp.z[i]);
        total += ev.scores[i];
      }
      const double nn = static_cast<double>(n);
      const double md = static_cast<double>(m);
      ev.alpha = nn / (md * (nn - md));
      ev.beta = -total / (nn - md) + tau0;
      break;
    }
  }
  return ev;
}

}  // namespace

double LocalShiftIndicator::window() const {
  if (n == 0) throw InvalidInput("LocalShiftIndicator: population size required");
  return h / std::sqrt(static_cast<double>(n));
}

double LocalShiftIndicator::operator()(double x) const {
  const double w = window();
  if (h >= 0.0) {
    return (0.0 <= x && x < w) ? 1.0 : 0.0;
  }
  return (w <= x && x < 0.0) ? -1.0 : 0.0;
}

NullDistribution null_distribution(const Experiment& exp, double tau0, StatKind stat,
                                   const AssignmentSpace& space, TiePolicy policy) {
  if (space.n != exp.size() || space.m != exp.treated_count()) {
    throw InvalidInput("null_distribution: assignment space does not match the experiment");
  }
  const StatEvaluator ev = make_evaluator(exp, tau0, stat, policy);

  NullDistribution dist;
  dist.space = space;
  if (space.mode == AssignmentSpace::Mode::exact) {
    AssignmentEnumerator en(space.n, space.m);
    dist.values.reserve(en.total());
    std::vector<int> z;
    while (en.next(z)) dist.values.push_back(ev(z));
  } else {
    Rng rng(space.seed);
    dist.values.reserve(space.draws);
    for (std::uint64_t r = 0; r < space.draws; ++r) {
      dist.values.push_back(ev(draw_assignment(space.n, space.m, rng)));
    }
  }
  std::sort(dist.values.begin(), dist.values.end());
  return dist;
}

double observed_statistic(const Experiment& exp, double tau0, StatKind stat,
                          TiePolicy policy) {
  return make_evaluator(exp, tau0, stat, policy)(exp.z);
}

double p_value(const NullDistribution& dist, double observed, Sided sided) {
  if (dist.values.empty()) throw InvalidInput("p_value: empty null distribution");
  if (!std::isfinite(observed)) throw InvalidInput("p_value: observed value must be finite");
  const auto& v = dist.values;
  const double total = static_cast<double>(v.size());
  const auto le =
      static_cast<double>(std::upper_bound(v.begin(), v.end(), observed) - v.begin());
  const auto ge =
      static_cast<double>(v.end() - std::lower_bound(v.begin(), v.end(), observed));
  switch (sided) {
    case Sided::left:
      return le / total;
    case Sided::right:
      return ge / total;
    case Sided::two_sided:
      return std::min(1.0, 2.0 * std::min(le, ge) / total);
  }
  throw InvalidInput("p_value: unknown sidedness");
}

ConfidenceInterval test_inversion_ci(const Experiment& exp, StatKind stat,
                                     const AssignmentSpace& space, double level,
                                     std::optional<TauGrid> grid, TiePolicy policy) {
  if (!(level > 0.0 && level < 1.0)) {
    throw InvalidInput("test_inversion_ci: level must lie strictly between 0 and 1");
  }

  TauGrid g;
  if (grid.has_value()) {
    g = *grid;
    if (!(g.hi > g.lo) || g.points < 3) {
      throw InvalidInput("test_inversion_ci: grid needs hi > lo and at least 3 points");
    }
  } else {
    const Estimate dm = diff_in_means(exp);
    const double spread = dm.se.value_or(0.0) > 0.0 ? *dm.se : scale_of(exp.y);
    g.lo = dm.point - 6.0 * spread;
    g.hi = dm.point + 6.0 * spread;
    g.points = 513;
  }

  const double alpha = 1.0 - level;
  // k/R p-values sitting exactly on alpha must count as kept.
  const auto keeps = [&](double tau0) {
    const NullDistribution dist = null_distribution(exp, tau0, stat, space, policy);
    const double obs = observed_statistic(exp, tau0, stat, policy);
    return p_value(dist, obs, Sided::two_sided) >= alpha - 1e-12;
  };

  std::vector<double> taus(static_cast<std::size_t>(g.points));
  for (int k = 0; k < g.points; ++k) {
    taus[static_cast<std::size_t>(k)] =
        g.lo + (g.hi - g.lo) * static_cast<double>(k) / static_cast<double>(g.points - 1);
  }
  std::vector<char> kept(taus.size());
  std::size_t first = taus.size(), last = taus.size();
  for (std::size_t k = 0; k < taus.size(); ++k) {
    kept[k] = keeps(taus[k]) ? 1 : 0;
    if (kept[k]) {
      if (first == taus.size()) first = k;
      last = k;
    }
  }
  if (first == taus.size()) {
    throw NumericError("test_inversion_ci: every grid value is rejected; no interval found");
  }
  if (kept.front() || kept.back()) {
    throw InvalidInput("test_inversion_ci: a grid endpoint is kept; widen the grid");
  }

  // Sharpen each edge between the bracketing rejected/kept neighbors.
  const auto sharpen = [&](double rejected, double accepted) {
    for (int it = 0; it < 40 && std::abs(accepted - rejected) > 1e-12 * scale_of(exp.y);
         ++it) {
      const double mid = 0.5 * (rejected + accepted);
      if (keeps(mid)) {
        accepted = mid;
      } else {
        rejected = mid;
      }
    }
    return 0.5 * (rejected + accepted);
  };
  const double lo = sharpen(taus[first - 1], taus[first]);
  const double hi = sharpen(taus[last + 1], taus[last]);
  return {lo, hi, level};
}

std::pair<std::vector<double>, std::vector<double>> decomposition_check(
    const std::vector<double>& b, std::size_t m, double h) {
  require_finite(b, "decomposition_check control outcomes");
  if (!std::isfinite(h)) throw InvalidInput("decomposition_check: shift must be finite");
  const std::size_t n = b.size();
  if (n < 2 || m < 1 || m > n - 1) {
    throw InvalidInput("decomposition_check: m must be in [1, n-1]");
  }

  const LocalShiftIndicator ind{h, n};
  const double shift = ind.window();

  AssignmentEnumerator en(n, m);
  std::vector<double> lhs, rhs;
  lhs.reserve(en.total());
  rhs.reserve(en.total());

  std::vector<int> z;
  std::vector<double> shifted(n);
  while (en.next(z)) {
    for (std::size_t i = 0; i < n; ++i) {
      shifted[i] = b[i] - shift * static_cast<double>(z[i]);
    }
    lhs.push_back(rank_sum(shifted, z, TiePolicy::up()));

    double gamma = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (z[i]) continue;  // i ranges over controls
      for (std::size_t j = 0; j < n; ++j) {
        if (!z[j]) continue;  // j ranges over treated
        gamma += ind(b[j] - b[i]);
      }
    }
    rhs.push_back(rank_sum(b, z, TiePolicy::up()) - gamma);
  }

  std::sort(lhs.begin(), lhs.end());
  std::sort(rhs.begin(), rhs.end());
  return {std::move(lhs), std::move(rhs)};
}

}  // namespace rankshift
