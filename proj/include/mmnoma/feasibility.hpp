#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mmnoma/assignment.hpp"
#include "mmnoma/matrix.hpp"
#include "mmnoma/rates.hpp"
#include "mmnoma/simplex.hpp"

namespace mmnoma {

// Per-user SINR targets in decoding-stacked order (beam 0's users in decode
// order, then beam 1's, ...).
struct SinrTarget {
  std::vector<double> gamma;

  std::size_t size() const { return gamma.size(); }
  double& operator[](std::size_t i) { return gamma[i]; }
  double operator[](std::size_t i) const { return gamma[i]; }
};

/// QoS floors gamma_bar = 2^rbar - 1 in stacked order.
inline SinrTarget qos_floors(const Assignment& a, const std::vector<double>& r_min) {
  SinrTarget t;
  for (int u : a.stacked_users()) {
    t.gamma.push_back(std::exp2(r_min[static_cast<std::size_t>(u)]) - 1.0);
  }
  return t;
}

// The compact-form matrices of the target-achievability system
// (I - (Lambda + D G)) beta >= sigma^2 D 1.
struct FeasMatrices {
  Matrix lambda;          // block-diagonal, strictly upper triangular blocks
  std::vector<double> d;  // diagonal of D: Gamma_j / g_j^m
  Matrix g_cross;         // inter-beam gains, zero on same-beam columns

  Matrix d_times_g() const {
    Matrix r = g_cross;
    for (std::size_t i = 0; i < r.rows(); ++i) {
      for (std::size_t j = 0; j < r.cols(); ++j) r(i, j) *= d[i];
    }
    return r;
  }

  /// A = Lambda + D G, the nonnegative matrix whose spectral radius decides
  /// achievability.
  Matrix system_matrix() const { return lambda + d_times_g(); }
};

enum class FeasReason {
  radius_ge_one,
  power_budget_exceeded,
  order_constraint_violated_lp_used,
  feasible_closed_form,
  lp_infeasible,
};

struct FeasVerdict {
  bool member = false;
  double spectral_radius = 0.0;
  std::optional<PowerAllocation> min_power;
  FeasReason reason = FeasReason::lp_infeasible;
  double min_total_power = 0.0;  // P' of the power-minimization problem
};

/// Builds (Lambda, D, G) for the given schedule and targets. Every scheduled
/// user must have positive own-beam gain.
inline FeasMatrices build_matrices(const GainMatrix& g, const Assignment& a, const SinrTarget& t) {
  const std::vector<int> users = a.stacked_users();
  const std::size_t n = users.size();
  if (t.size() != n) throw std::invalid_argument("build_matrices: target size mismatch");

  std::vector<int> beam_of_stacked(n);
  {
    std::size_t s = 0;
    for (std::size_t m = 0; m < a.num_beams(); ++m) {
      for (std::size_t i = 0; i < a.order[m].size(); ++i) beam_of_stacked[s++] = static_cast<int>(m);
    }
  }

  FeasMatrices mats;
  mats.lambda = Matrix(n, n);
  mats.g_cross = Matrix(n, n);
  mats.d.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t user = static_cast<std::size_t>(users[r]);
    const std::size_t m = static_cast<std::size_t>(beam_of_stacked[r]);
    const double own_gain = g(user, m);
    if (own_gain <= 0.0) {
      throw std::invalid_argument("build_matrices: zero own-beam gain for a scheduled user");
    }
    mats.d[r] = t[r] / own_gain;
    for (std::size_t c = 0; c < n; ++c) {
      if (c == r) continue;
      const std::size_t cm = static_cast<std::size_t>(beam_of_stacked[c]);
      if (cm == m) {
        if (c > r) mats.lambda(r, c) = t[r];  // same beam, decoded later
      } else {
        mats.g_cross(r, c) = g(user, cm);
      }
    }
  }
  return mats;
}

/// Perron-Frobenius spectral radius of a nonnegative matrix. Power iteration
/// on the shifted matrix with Collatz-Wielandt brackets; falls back to
/// Gelfand norm-squaring when the bracket stalls.
inline double spectral_radius(const Matrix& a, double tol = 1e-10, int max_iters = 10000) {
  const std::size_t n = a.rows();
  if (n == 0) return 0.0;
  const double shift = a.inf_norm() * 0.5 + 1.0;
  Matrix shifted = a;
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) += shift;

  std::vector<double> v(n, 1.0);
  for (int it = 0; it < max_iters; ++it) {
    std::vector<double> w = shifted.apply(v);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ratio = w[i] / v[i];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      norm = std::max(norm, w[i]);
    }
    if (hi - lo <= tol * hi) return std::max(0.0, hi - shift);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
  }

  // Gelfand fallback: rho = lim ||A^(2^p)||^(1/2^p), with per-step
  // normalization to avoid overflow.
  Matrix b = a;
  double log_scale = 0.0;
  double weight = 1.0;
  for (int p = 0; p < 60; ++p) {
    const double norm = b.inf_norm();
    if (norm == 0.0) return 0.0;
    log_scale += weight * std::log(norm);
    b = (b * (1.0 / norm)) * (b * (1.0 / norm));
    weight *= 0.5;
  }
  log_scale += weight * std::log(std::max(b.inf_norm(), 1e-300));
  return std::exp(log_scale);
}

namespace detail {

// Linear constraint rows over the stacked power vector (scaled by p_ref):
// QoS/target SINR floors plus the SIC order conditions, in A x <= b form.
struct LpRows {
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  bool trivially_infeasible = false;
};

inline LpRows target_constraint_rows(const GainMatrix& g, const Assignment& a,
                                     const SinrTarget& t, double sigma2, double p_ref) {
  const std::vector<int> users = a.stacked_users();
  const std::size_t n = users.size();
  std::vector<int> beam_of_stacked(n);
  std::vector<std::pair<std::size_t, std::size_t>> beam_span(a.num_beams());
  {
    std::size_t s = 0;
    for (std::size_t m = 0; m < a.num_beams(); ++m) {
      beam_span[m] = {s, s + a.order[m].size()};
      for (std::size_t i = 0; i < a.order[m].size(); ++i) beam_of_stacked[s++] = static_cast<int>(m);
    }
  }

  LpRows rows;
  auto push_ge = [&](std::vector<double> coef, double rhs) {
    // coef . x >= rhs  ->  -coef . x <= -rhs, row-normalized.
    double scale = std::abs(rhs);
    for (double c : coef) scale = std::max(scale, std::abs(c));
    if (scale == 0.0) return;  // 0 >= 0, trivially satisfied
    bool all_zero = true;
    for (double c : coef) {
      if (c != 0.0) all_zero = false;
    }
    if (all_zero) {
      if (rhs > 0.0) rows.trivially_infeasible = true;
      return;
    }
    for (double& c : coef) c = -c / scale;
    rows.a.push_back(std::move(coef));
    rows.b.push_back(-rhs / scale);
  };

  // SINR target rows: g_j^m b_j - Gamma_j (g_j^m * intra + cross) >= Gamma_j sigma^2.
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t user = static_cast<std::size_t>(users[r]);
    const std::size_t m = static_cast<std::size_t>(beam_of_stacked[r]);
    const double own = g(user, m);
    std::vector<double> coef(n, 0.0);
    coef[r] = own * p_ref;
    for (std::size_t c = beam_span[m].first; c < beam_span[m].second; ++c) {
      if (c > r) coef[c] -= t[r] * own * p_ref;
    }
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t cm = static_cast<std::size_t>(beam_of_stacked[c]);
      if (cm != m) coef[c] -= t[r] * g(user, cm) * p_ref;
    }
    push_ge(std::move(coef), t[r] * sigma2);
  }

  // SIC order rows, linear in the beam totals.
  for (std::size_t m = 0; m < a.num_beams(); ++m) {
    const auto& beam = a.order[m];
    for (std::size_t jp = 0; jp < beam.size(); ++jp) {
      for (std::size_t kp = jp + 1; kp < beam.size(); ++kp) {
        const std::size_t j = static_cast<std::size_t>(beam[jp]);
        const std::size_t k = static_cast<std::size_t>(beam[kp]);
        std::vector<double> coef(n, 0.0);
        for (std::size_t c = 0; c < n; ++c) {
          const std::size_t cm = static_cast<std::size_t>(beam_of_stacked[c]);
          if (cm == m) continue;
          coef[c] = (g(k, m) * g(j, cm) - g(j, m) * g(k, cm)) * p_ref;
        }
        push_ge(std::move(coef), -(g(k, m) - g(j, m)) * sigma2);
      }
    }
  }
  return rows;
}

/// Minimizes total power subject to the given rows, optionally capped by
/// P_tot. Returns nullopt when infeasible.
inline std::optional<std::vector<double>> min_power_lp(const GainMatrix& g, const Assignment& a,
                                                       const SinrTarget& t, double sigma2,
                                                       double p_tot, bool cap_power) {
  const std::size_t n = a.scheduled_count();
  const double p_ref = p_tot > 0.0 ? p_tot : 1.0;
  LpRows rows = target_constraint_rows(g, a, t, sigma2, p_ref);
  if (rows.trivially_infeasible) return std::nullopt;
  if (cap_power) {
    rows.a.push_back(std::vector<double>(n, 1.0));
    rows.b.push_back(p_tot / p_ref);
  }
  std::vector<double> objective(n, -1.0);  // maximize -sum == minimize sum
  LpResult lp = solve_lp_max(rows.a, rows.b, objective);
  if (lp.status != LpResult::Status::optimal) return std::nullopt;
  std::vector<double> beta(n);
  for (std::size_t i = 0; i < n; ++i) beta[i] = std::max(0.0, lp.x[i]) * p_ref;
  return beta;
}

}  // namespace detail

/// Closed-form minimal power vector for achievable targets:
/// beta* = (I - (Lambda + D G))^-1 sigma^2 D 1. Requires rho < 1.
inline std::vector<double> min_power_for_targets(const FeasMatrices& mats, double sigma2) {
  const Matrix sys = mats.system_matrix();
  const std::size_t n = sys.rows();
  if (spectral_radius(sys) >= 1.0) {
    throw std::invalid_argument("min_power_for_targets: spectral radius >= 1");
  }
  Matrix lhs = Matrix::identity(n) - sys;
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = sigma2 * mats.d[i];
  auto beta = solve_linear(lhs, rhs);
  if (!beta) throw std::logic_error("min_power_for_targets: singular system with rho < 1");
  return *beta;
}

/// Membership test for targets t in the achievable set: spectral-radius
/// screen, closed-form minimal power, then the LP fallback when the
/// closed-form point breaks an SIC order condition.
inline FeasVerdict check_membership(const GainMatrix& g, const Assignment& a, const SinrTarget& t,
                                    double p_tot, double sigma2) {
  FeasVerdict v;
  const FeasMatrices mats = build_matrices(g, a, t);
  const Matrix sys = mats.system_matrix();
  v.spectral_radius = spectral_radius(sys);
  if (v.spectral_radius >= 1.0) {
    v.reason = FeasReason::radius_ge_one;
    return v;
  }

  const std::vector<double> beta_star = min_power_for_targets(mats, sigma2);
  double total = 0.0;
  for (double b : beta_star) total += b;
  v.min_total_power = total;
  if (total > p_tot * (1.0 + 1e-9)) {
    v.reason = FeasReason::power_budget_exceeded;
    return v;
  }

  const PowerAllocation p = unstack_powers(a, beta_star);
  if (sic_order_ok(g, a, p, sigma2).ok) {
    v.member = true;
    v.reason = FeasReason::feasible_closed_form;
    v.min_power = p;
    return v;
  }

  auto lp_beta = detail::min_power_lp(g, a, t, sigma2, p_tot, /*cap_power=*/true);
  if (!lp_beta) {
    v.reason = FeasReason::lp_infeasible;
    return v;
  }
  double lp_total = 0.0;
  for (double b : *lp_beta) lp_total += b;
  v.member = true;
  v.reason = FeasReason::order_constraint_violated_lp_used;
  v.min_power = unstack_powers(a, *lp_beta);
  v.min_total_power = lp_total;
  return v;
}

/// Schedule feasibility at the QoS floors (the power-minimization LP): the
/// schedule admits a valid power allocation iff the minimal total power P'
/// does not exceed the budget.
inline FeasVerdict check_qos_feasible(const GainMatrix& g, const Assignment& a,
                                      const std::vector<double>& r_min, double p_tot,
                                      double sigma2) {
  FeasVerdict v;
  const SinrTarget floors = qos_floors(a, r_min);
  auto beta = detail::min_power_lp(g, a, floors, sigma2, p_tot, /*cap_power=*/false);
  if (!beta) {
    v.reason = FeasReason::lp_infeasible;
    return v;
  }
  double total = 0.0;
  for (double b : *beta) total += b;
  v.min_total_power = total;
  v.min_power = unstack_powers(a, *beta);
  if (total > p_tot * (1.0 + 1e-9)) {
    v.reason = FeasReason::power_budget_exceeded;
    return v;
  }
  v.member = true;
  v.reason = FeasReason::order_constraint_violated_lp_used;
  return v;
}

}  // namespace mmnoma
