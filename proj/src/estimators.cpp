#include "rankshift/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "rankshift/common.hpp"

namespace rankshift {

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (const double x : v) m = std::max(m, std::abs(x));
  return m;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Rank-sum of `ranks` over treated units minus the tie-aware null mean
// (m/N) * sum(ranks). Integer multiple of 1/(2N) under every tie policy, so a
// quarter-quantum band separates true zeros from rounding noise.
double centered_rank_sum(const std::vector<double>& ranks, const std::vector<int>& z,
                         std::size_t m) {
  double treated = 0.0, total = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    total += ranks[i];
    if (z[i]) treated += ranks[i];
  }
  return treated - static_cast<double>(m) / static_cast<double>(ranks.size()) * total;
}

struct Hc2Result {
  double point = 0.0;
  double se = 0.0;
  Eigen::Index rank = 0;
};

// Coefficient of design column `target` plus its HC2 sandwich standard error.
Hc2Result hc2_coefficient(const std::vector<double>& y, const Eigen::MatrixXd& design,
                          Eigen::Index target) {
  const Eigen::Index n = design.rows();

  // The target coefficient is identified only if its column leaves the span
  // of the others. Pivot order alone cannot tell (with exact duplicates the
  // QR may keep the target and drop its copy), so check directly.
  Eigen::MatrixXd others(n, design.cols() - 1);
  others.leftCols(target) = design.leftCols(target);
  others.rightCols(design.cols() - 1 - target) = design.rightCols(design.cols() - 1 - target);
  const Eigen::VectorXd target_col = design.col(target);
  const Eigen::VectorXd target_resid =
      target_col - others * Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(others).solve(target_col);
  if (target_resid.norm() <= 1e-10 * target_col.norm()) {
    throw NumericError("treatment indicator is collinear with the covariates");
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::Index rank = qr.rank();
  const Eigen::VectorXd yv = to_vector(y);
  const Eigen::VectorXd coef = qr.solve(yv);
  const Eigen::VectorXd resid = yv - design * coef;

  const auto& perm = qr.colsPermutation().indices();
  Eigen::Index target_pos = -1;
  for (Eigen::Index j = 0; j < rank; ++j) {
    if (perm[j] == target) target_pos = j;
  }
  if (target_pos < 0) {
    throw NumericError("treatment indicator is collinear with the covariates");
  }

  const Eigen::MatrixXd qthin = qr.householderQ() * Eigen::MatrixXd::Identity(n, rank);
  const Eigen::MatrixXd r11 =
      qr.matrixR().topLeftCorner(rank, rank).triangularView<Eigen::Upper>();
  // (Xk' Xk)^-1 for the kept (pivoted-in) columns, via Xk = Q_thin R11.
  const Eigen::MatrixXd rinv =
      r11.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(rank, rank));
  const Eigen::MatrixXd xtx_inv = rinv * rinv.transpose();

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(rank, rank);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = std::min(qthin.row(i).squaredNorm(), 1.0);
    const double w = resid[i] * resid[i] / std::max(1.0 - h, 1e-12);
    Eigen::VectorXd row(rank);
    for (Eigen::Index j = 0; j < rank; ++j) row[j] = design(i, perm[j]);
    meat.noalias() += w * row * row.transpose();
  }
  const Eigen::MatrixXd cov = xtx_inv * meat * xtx_inv;

  Hc2Result out;
  out.point = coef[target];
  out.se = std::sqrt(std::max(cov(target_pos, target_pos), 0.0));
  out.rank = rank;
  return out;
}

const Eigen::MatrixXd& require_covariates(const Experiment& exp, const char* who) {
  if (!exp.x.has_value()) {
    throw InvalidInput(std::string(who) + ": experiment carries no covariate matrix");
  }
  return *exp.x;
}

}  // namespace

LeastSquaresFit ols_fit(const std::vector<double>& responses, const Eigen::MatrixXd& x,
                        bool add_intercept) {
  const Eigen::Index n = static_cast<Eigen::Index>(responses.size());
  if (x.rows() != n) throw InvalidInput("ols_fit: row count does not match responses");
  require_finite(responses, "ols_fit responses");

  const Eigen::Index p = x.cols() + (add_intercept ? 1 : 0);
  LeastSquaresFit fit;
  if (p == 0) {
    fit.coefficients.resize(0);
    fit.residuals = responses;
    fit.hat_diag.assign(static_cast<std::size_t>(n), 0.0);
    fit.rank = 0;
    return fit;
  }

  Eigen::MatrixXd design(n, p);
  if (add_intercept) {
    design.col(0).setOnes();
    design.rightCols(x.cols()) = x;
  } else {
    design = x;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  fit.rank = qr.rank();
  const Eigen::VectorXd yv = to_vector(responses);
  fit.coefficients = qr.solve(yv);
  const Eigen::VectorXd resid = yv - design * fit.coefficients;
  fit.residuals.assign(resid.data(), resid.data() + n);

  const Eigen::MatrixXd qthin = qr.householderQ() * Eigen::MatrixXd::Identity(n, fit.rank);
  fit.hat_diag.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    fit.hat_diag[static_cast<std::size_t>(i)] = std::min(qthin.row(i).squaredNorm(), 1.0);
  }
  return fit;
}

Estimate diff_in_means(const Experiment& exp) {
  const std::size_t n = exp.size();
  const std::size_t m = exp.treated_count();
  std::vector<double> treated, control;
  treated.reserve(m);
  control.reserve(n - m);
  for (std::size_t i = 0; i < n; ++i) {
    (exp.z[i] ? treated : control).push_back(exp.y[i]);
  }

  Estimate est;
  est.method = "diff_in_means";
  est.point = mean_of(treated) - mean_of(control);
  if (treated.size() >= 2 && control.size() >= 2) {
    const double s1 = sample_variance(treated);
    const double s0 = sample_variance(control);
    est.se = std::sqrt(s1 / static_cast<double>(treated.size()) +
                       s0 / static_cast<double>(control.size()));
  }
  return est;
}

Estimate rank_unadjusted(const Experiment& exp) {
  const std::size_t n = exp.size();
  std::vector<double> diffs;
  diffs.reserve(exp.treated_count() * (n - exp.treated_count()));
  for (std::size_t i = 0; i < n; ++i) {
    if (!exp.z[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (!exp.z[j]) diffs.push_back(exp.y[i] - exp.y[j]);
    }
  }

  const std::size_t k = diffs.size();
  double point;
  if (k % 2 == 1) {
    std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(k / 2),
                     diffs.end());
    point = diffs[k / 2];
  } else {
    std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(k / 2),
                     diffs.end());
    const double upper = diffs[k / 2];
    const double lower =
        *std::max_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(k / 2));
    point = (lower + upper) / 2.0;
  }

  Estimate est;
  est.method = "rank_unadjusted";
  est.point = point;
  est.diagnostics["pairs"] = static_cast<double>(k);
  return est;
}

std::vector<double> shift_residuals(const Experiment& exp, double tau) {
  const Eigen::MatrixXd& x = require_covariates(exp, "shift_residuals");
  if (!std::isfinite(tau)) throw InvalidInput("shift_residuals: shift must be finite");

  const std::size_t n = exp.size();
  std::vector<double> adjusted(n);
  for (std::size_t i = 0; i < n; ++i) {
    adjusted[i] = exp.y[i] - tau * static_cast<double>(exp.z[i]);
  }
  std::vector<double> v = ols_fit(adjusted, x, true).residuals;
  // A numerically perfect fit leaves rounding noise of no rank meaning; treat
  // it as the fully tied vector it represents.
  if (max_abs(v) <= 1e-11 * max_abs(adjusted)) {
    std::fill(v.begin(), v.end(), 0.0);
  }
  return v;
}

std::pair<double, double> adjusted_rank_stat(const Experiment& exp, double tau,
                                             TiePolicy policy) {
  const std::size_t n = exp.size();
  const std::vector<double> v = shift_residuals(exp, tau);
  const RankVector r = rank(v, policy);
  double stat = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += r.ranks[i];
    if (exp.z[i]) stat += r.ranks[i];
  }
  const double null_mean =
      static_cast<double>(exp.treated_count()) / static_cast<double>(n) * total;
  return {stat, null_mean};
}

Estimate rank_adjusted(const Experiment& exp, const InversionSolver& solver,
                       TiePolicy policy) {
  const Eigen::MatrixXd& x = require_covariates(exp, "rank_adjusted");
  if (!(solver.expansion > 1.0)) throw InvalidInput("rank_adjusted: expansion must exceed 1");
  if (solver.abs_tol < 0.0) throw InvalidInput("rank_adjusted: tolerance must be positive");
  if (solver.max_iter < 1 || solver.grid_points < 2) {
    throw InvalidInput("rank_adjusted: iteration and grid limits must be positive");
  }

  const std::size_t n = exp.size();
  const std::size_t m = exp.treated_count();

  // Residuals of y - tau*z on [1, x] decompose as e_y - tau*e_z, so the
  // per-tau work is a saxpy plus a ranking instead of a fresh regression.
  const std::vector<double> e_y = ols_fit(exp.y, x, true).residuals;
  std::vector<double> zd(n);
  for (std::size_t i = 0; i < n; ++i) zd[i] = static_cast<double>(exp.z[i]);
  const std::vector<double> e_z = ols_fit(zd, x, true).residuals;

  const double scale_y = max_abs(e_y);
  const double scale_z = max_abs(e_z);
  if (scale_z <= 1e-10) {
    throw NumericError("rank_adjusted: treatment indicator is collinear with the covariates");
  }

  long evals = 0;
  std::vector<double> v(n);
  const auto g = [&](double tau) {
    ++evals;
    for (std::size_t i = 0; i < n; ++i) v[i] = e_y[i] - tau * e_z[i];
    if (max_abs(v) <= 1e-11 * (scale_y + std::abs(tau) * scale_z)) {
      return 0.0;  // perfect fit: fully tied, statistic sits at its null mean
    }
    return centered_rank_sum(rank(v, policy).ranks, exp.z, m);
  };
  const double geps = 0.25 / static_cast<double>(n);

  const double center = diff_in_means(exp).point;
  const double base_width = 4.0 * scale_of(exp.y);
  const double tol =
      solver.abs_tol > 0.0 ? solver.abs_tol : 1e-8 * scale_of(exp.y);

  // Expand around the difference in means until the equation changes sign.
  double width = base_width;
  double lo = center - width;
  int tries = 0;
  while (g(lo) <= geps) {
    if (++tries > solver.max_iter) {
      throw NumericError("rank_adjusted: no lower bracket for the estimating equation");
    }
    width *= solver.expansion;
    lo = center - width;
  }
  width = base_width;
  double hi = center + width;
  tries = 0;
  while (g(hi) >= -geps) {
    if (++tries > solver.max_iter) {
      throw NumericError("rank_adjusted: no upper bracket for the estimating equation");
    }
    width *= solver.expansion;
    hi = center + width;
  }

  // The equation is a non-increasing step function. A scan across the bracket
  // must never see a strictly positive value after a strictly negative one.
  bool seen_negative = false;
  for (int k = 0; k < solver.grid_points; ++k) {
    const double tau =
        lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(solver.grid_points - 1);
    const double gv = g(tau);
    if (gv < -geps) {
      seen_negative = true;
    } else if (gv > geps && seen_negative) {
      throw NumericError("rank_adjusted: estimating equation is not monotone in the shift");
    }
  }

  // sup of the strictly-positive region.
  double a = lo, b = hi;
  for (int it = 0; it < solver.max_iter && b - a > tol; ++it) {
    const double mid = 0.5 * (a + b);
    if (g(mid) > geps) {
      a = mid;
    } else {
      b = mid;
    }
  }
  const double tau_sup = 0.5 * (a + b);

  // inf of the strictly-negative region.
  a = lo;
  b = hi;
  for (int it = 0; it < solver.max_iter && b - a > tol; ++it) {
    const double mid = 0.5 * (a + b);
    if (g(mid) < -geps) {
      b = mid;
    } else {
      a = mid;
    }
  }
  const double tau_inf = 0.5 * (a + b);

  Estimate est;
  est.method = "rank_adjusted";
  est.point = 0.5 * (tau_sup + tau_inf);
  est.diagnostics["inv_lo"] = tau_sup;
  est.diagnostics["inv_hi"] = tau_inf;
  est.diagnostics["bracket_lo"] = lo;
  est.diagnostics["bracket_hi"] = hi;
  est.diagnostics["stat_evals"] = static_cast<double>(evals);
  est.diagnostics["monotone_scan"] = 1.0;
  return est;
}

Estimate ols_adjusted(const Experiment& exp) {
  const Eigen::MatrixXd& x = require_covariates(exp, "ols_adjusted");
  const Eigen::Index n = static_cast<Eigen::Index>(exp.size());
  Eigen::MatrixXd design(n, 2 + x.cols());
  design.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 1) = static_cast<double>(exp.z[static_cast<std::size_t>(i)]);
  }
  design.rightCols(x.cols()) = x;

  const Hc2Result r = hc2_coefficient(exp.y, design, 1);
  Estimate est;
  est.method = "ols_adjusted";
  est.point = r.point;
  est.se = r.se;
  est.diagnostics["design_rank"] = static_cast<double>(r.rank);
  return est;
}

Estimate lin_interaction(const Experiment& exp) {
  const Eigen::MatrixXd& x = require_covariates(exp, "lin_interaction");
  const Eigen::Index n = static_cast<Eigen::Index>(exp.size());
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd centered = x;
  if (p > 0) centered.rowwise() -= x.colwise().mean();

  Eigen::MatrixXd design(n, 2 + 2 * p);
  design.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 1) = static_cast<double>(exp.z[static_cast<std::size_t>(i)]);
  }
  design.middleCols(2, p) = centered;
  for (Eigen::Index i = 0; i < n; ++i) {
    design.rightCols(p).row(i) = design(i, 1) * centered.row(i);
  }

  const Hc2Result r = hc2_coefficient(exp.y, design, 1);
  Estimate est;
  est.method = "lin_interaction";
  est.point = r.point;
  est.se = r.se;
  est.diagnostics["design_rank"] = static_cast<double>(r.rank);
  return est;
}

}  // namespace rankshift
