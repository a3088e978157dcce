#include "rankshift/ranks.hpp"

#include <algorithm>
#include <numeric>

#include "rankshift/common.hpp"
#include "rankshift/rng.hpp"

namespace rankshift {

RankVector rank(const std::vector<double>& v, TiePolicy policy) {
  require_finite(v, "rank input");
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });

  RankVector out;
  out.policy = policy;
  out.ranks.resize(n);
  Rng tie_rng(policy.seed);

  std::size_t s = 0;
  while (s < n) {
    std::size_t e = s + 1;
    while (e < n && v[order[e]] == v[order[s]]) ++e;
    const std::size_t t = e - s;
    switch (policy.kind) {
      case TiePolicy::Kind::up:
        // Highest rank in the block = count of values <= the block value.
        for (std::size_t k = s; k < e; ++k) out.ranks[order[k]] = static_cast<double>(e);
        break;
      case TiePolicy::Kind::average:
        for (std::size_t k = s; k < e; ++k) {
          out.ranks[order[k]] = static_cast<double>(s) + (1.0 + static_cast<double>(t)) / 2.0;
        }
        break;
      case TiePolicy::Kind::random: {
        std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(s),
                                         order.begin() + static_cast<std::ptrdiff_t>(e));
        for (std::size_t i = 0; i + 1 < t; ++i) {
          const std::size_t j = i + static_cast<std::size_t>(tie_rng.below(t - i));
          std::swap(members[i], members[j]);
        }
        for (std::size_t k = 0; k < t; ++k) {
          out.ranks[members[k]] = static_cast<double>(s + k + 1);
        }
        break;
      }
    }
    s = e;
  }
  return out;
}

double rank_sum(const std::vector<double>& v, const std::vector<int>& z, TiePolicy policy) {
  if (v.size() != z.size()) throw InvalidInput("rank_sum: value and assignment lengths differ");
  const RankVector r = rank(v, policy);
  double t = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (z[i]) t += r.ranks[i];
  }
  return t;
}

double wrs_statistic(const Experiment& exp, double tau0, TiePolicy policy) {
  if (!std::isfinite(tau0)) throw InvalidInput("wrs_statistic: shift must be finite");
  std::vector<double> adjusted(exp.size());
  for (std::size_t i = 0; i < exp.size(); ++i) {
    adjusted[i] = exp.y[i] - tau0 * static_cast<double>(exp.z[i]);
  }
  return rank_sum(adjusted, exp.z, policy);
}

std::pair<double, double> wrs_null_moments(const std::vector<double>& adjusted,
                                           std::size_t m, TiePolicy policy) {
  const std::size_t n = adjusted.size();
  if (n < 2) throw InvalidInput("wrs_null_moments: need at least 2 values");
  if (m < 1 || m > n - 1) throw InvalidInput("wrs_null_moments: m must be in [1, n-1]");
  const RankVector r = rank(adjusted, policy);
  const double nn = static_cast<double>(n);
  const double frac = static_cast<double>(m) / nn;
  const double qbar = mean_of(r.ranks);
  double ss = 0.0;
  for (const double q : r.ranks) ss += (q - qbar) * (q - qbar);
  const double mean = frac * qbar * nn;
  const double variance = frac * (1.0 - frac) * nn / (nn - 1.0) * ss;
  return {mean, variance};
}

double avg_rank_ss_identity(const std::vector<std::size_t>& block_sizes) {
  if (block_sizes.empty()) throw InvalidInput("avg_rank_ss_identity: no blocks given");
  double n = 0.0;
  double correction = 0.0;
  for (const std::size_t t : block_sizes) {
    if (t == 0) throw InvalidInput("avg_rank_ss_identity: block sizes must be positive");
    const double td = static_cast<double>(t);
    n += td;
    correction += td * (td * td - 1.0) / 12.0;
  }
  return n * (n * n - 1.0) / 12.0 - correction;
}

}  // namespace rankshift
