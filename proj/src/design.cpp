#include "rankshift/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rankshift/common.hpp"

namespace rankshift {

std::uint64_t binomial_capped(std::size_t n, std::size_t m, std::uint64_t cap) {
  if (m > n) return 0;
  if (m > n - m) m = n - m;
  // C(n, k) = C(n, k-1) * (n - k + 1) / k; every intermediate is the integer
  // C(n, k), and with k <= n/2 those increase in k, so an early exit once the
  // cap is crossed is sound.
  std::uint64_t c = 1;
  for (std::size_t k = 1; k <= m; ++k) {
    const std::uint64_t num = static_cast<std::uint64_t>(n - k + 1);
    if (c > (std::numeric_limits<std::uint64_t>::max)() / num) return cap + 1;
    c = c * num / static_cast<std::uint64_t>(k);
    if (c > cap) return cap + 1;
  }
  return c;
}

Experiment::Experiment(std::vector<double> y_in, std::vector<int> z_in,
                       std::optional<Eigen::MatrixXd> x_in)
    : y(std::move(y_in)), z(std::move(z_in)), x(std::move(x_in)) {
  const std::size_t n = y.size();
  if (n < 2) throw InvalidInput("Experiment: need at least 2 units");
  if (z.size() != n) throw InvalidInput("Experiment: y and z lengths differ");
  require_finite(y, "Experiment responses");
  std::size_t m = 0;
  for (const int zi : z) {
    if (zi != 0 && zi != 1) throw InvalidInput("Experiment: assignment entries must be 0 or 1");
    m += static_cast<std::size_t>(zi);
  }
  if (m < 1 || m > n - 1) {
    throw InvalidInput("Experiment: need at least one treated and one control unit");
  }
  m_ = m;
  if (x.has_value()) {
    if (static_cast<std::size_t>(x->rows()) != n) {
      throw InvalidInput("Experiment: covariate matrix row count must equal the number of units");
    }
    if (!x->allFinite()) throw InvalidInput("Experiment: covariate entries must be finite");
  }
}

AssignmentSpace AssignmentSpace::exact(std::size_t n, std::size_t m, std::uint64_t cap) {
  if (m < 1 || m > n - 1 || n < 2) throw InvalidInput("AssignmentSpace: m must be in [1, n-1]");
  if (binomial_capped(n, m, cap) > cap) {
    throw InvalidInput("AssignmentSpace: assignment count exceeds the enumeration cap");
  }
  AssignmentSpace s;
  s.n = n;
  s.m = m;
  s.mode = Mode::exact;
  return s;
}

AssignmentSpace AssignmentSpace::monte_carlo(std::size_t n, std::size_t m,
                                             std::uint64_t draws, std::uint64_t seed) {
  if (m < 1 || m > n - 1 || n < 2) throw InvalidInput("AssignmentSpace: m must be in [1, n-1]");
  if (draws < 1) throw InvalidInput("AssignmentSpace: need at least one draw");
  AssignmentSpace s;
  s.n = n;
  s.m = m;
  s.mode = Mode::monte_carlo;
  s.draws = draws;
  s.seed = seed;
  return s;
}

std::vector<int> draw_assignment(std::size_t n, std::size_t m, Rng& rng) {
  if (n < 2 || m < 1 || m > n - 1) throw InvalidInput("draw_assignment: m must be in [1, n-1]");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Only the first m slots of the shuffle are needed.
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<int> z(n, 0);
  for (std::size_t i = 0; i < m; ++i) z[idx[i]] = 1;
  return z;
}

AssignmentEnumerator::AssignmentEnumerator(std::size_t n, std::size_t m, std::uint64_t cap)
    : n_(n), m_(m) {
  if (n < 2 || m < 1 || m > n - 1) {
    throw InvalidInput("AssignmentEnumerator: m must be in [1, n-1]");
  }
  total_ = binomial_capped(n, m, cap);
  if (total_ > cap) {
    throw InvalidInput("AssignmentEnumerator: assignment count exceeds the enumeration cap");
  }
  treated_.resize(m);
  std::iota(treated_.begin(), treated_.end(), std::size_t{0});
}

bool AssignmentEnumerator::next(std::vector<int>& z) {
  if (done_) return false;
  if (!fresh_) {
    // Advance to the next combination: bump the rightmost index that can move.
    std::size_t i = m_;
    while (i > 0) {
      --i;
      if (treated_[i] != i + n_ - m_) {
        ++treated_[i];
        for (std::size_t k = i + 1; k < m_; ++k) treated_[k] = treated_[k - 1] + 1;
        break;
      }
      if (i == 0) {
        done_ = true;
        return false;
      }
    }
  }
  fresh_ = false;
  z.assign(n_, 0);
  for (const std::size_t t : treated_) z[t] = 1;
  return true;
}

PotentialOutcomes PotentialOutcomes::from_control(std::vector<double> b, double tau) {
  require_finite(b, "control potential outcomes");
  if (!std::isfinite(tau)) throw InvalidInput("PotentialOutcomes: effect must be finite");
  PotentialOutcomes po;
  po.b = std::move(b);
  po.a.resize(po.b.size());
  for (std::size_t i = 0; i < po.b.size(); ++i) po.a[i] = po.b[i] + tau;
  po.tau = tau;
  return po;
}

PotentialOutcomes PotentialOutcomes::from_treated(std::vector<double> a, double tau) {
  require_finite(a, "treated potential outcomes");
  if (!std::isfinite(tau)) throw InvalidInput("PotentialOutcomes: effect must be finite");
  PotentialOutcomes po;
  po.a = std::move(a);
  po.b.resize(po.a.size());
  for (std::size_t i = 0; i < po.a.size(); ++i) po.b[i] = po.a[i] - tau;
  po.tau = tau;
  return po;
}

Experiment PotentialOutcomes::realize(const std::vector<int>& z,
                                      std::optional<Eigen::MatrixXd> x) const {
  if (z.size() != a.size()) throw InvalidInput("realize: assignment length mismatch");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = z[i] ? a[i] : b[i];
  return Experiment(std::move(y), z, std::move(x));
}

}  // namespace rankshift
