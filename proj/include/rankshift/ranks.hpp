// Rank computation with tie policies and the Wilcoxon rank-sum statistic.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rankshift/design.hpp"

namespace rankshift {

// How tied values are ranked.
//   up:      q_j = #{i : v_i <= v_j}; every member of a tied block gets the
//            block's highest rank.
//   average: every member of a tied block gets the mean of the block's ranks,
//            so the ranks always sum to N(N+1)/2.
//   random:  ties broken by a seeded shuffle; ranks are a permutation of 1..N.
struct TiePolicy {
  enum class Kind { up, average, random };

  Kind kind = Kind::up;
  std::uint64_t seed = 0;  // random only

  static TiePolicy up() { return {Kind::up, 0}; }
  static TiePolicy average() { return {Kind::average, 0}; }
  static TiePolicy random(std::uint64_t seed) { return {Kind::random, seed}; }
};

struct RankVector {
  std::vector<double> ranks;
  TiePolicy policy;
};

// Ranks of v under the policy. Equal floating-point values form one tied
// block; the inputs are data rather than iterates, so exact equality is the
// intended comparison.
RankVector rank(const std::vector<double>& v, TiePolicy policy = TiePolicy::up());

// Sum of the ranks of v over positions with z[i] = 1.
double rank_sum(const std::vector<double>& v, const std::vector<int>& z,
                TiePolicy policy = TiePolicy::up());

// Rank-sum statistic of the adjusted responses y - tau0 * z over the treated
// group. Non-increasing in tau0 under the up-rank policy.
double wrs_statistic(const Experiment& exp, double tau0,
                     TiePolicy policy = TiePolicy::up());

// Exact randomization mean and variance of the rank-sum statistic when m of
// the N given values are treated uniformly at random:
//   mean = (m/N) * sum(q),  variance = (m/N)(1 - m/N) * N/(N-1) * sum((q - qbar)^2)
// with q the ranks of `adjusted` under the policy.
std::pair<double, double> wrs_null_moments(const std::vector<double>& adjusted,
                                           std::size_t m,
                                           TiePolicy policy = TiePolicy::up());

// Centered sum of squares of average ranks from tied-block sizes alone:
//   N(N^2 - 1)/12 - sum_j t_j (t_j^2 - 1)/12,  N = sum_j t_j.
// Equals sum((q_avg - qbar)^2) computed directly from any vector with those
// tie blocks; exposed so tests can check the identity.
double avg_rank_ss_identity(const std::vector<std::size_t>& block_sizes);

}  // namespace rankshift
