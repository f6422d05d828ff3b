#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mmnoma/assignment.hpp"
#include "mmnoma/feasibility.hpp"
#include "mmnoma/matrix.hpp"
#include "mmnoma/rates.hpp"

namespace mmnoma {

// Coefficients of the logarithmic lower bound mu*ln(tau) + nu <= ln(1+tau),
// tight at tau_tilde.
struct BoundCoeffs {
  double mu;
  double nu;
};

inline BoundCoeffs tighten_bound(double tau_tilde) {
  if (!(tau_tilde > 0.0)) throw std::invalid_argument("tighten_bound: tau_tilde must be positive");
  const double mu = tau_tilde / (1.0 + tau_tilde);
  const double nu = std::log1p(tau_tilde) - mu * std::log(tau_tilde);
  return {mu, nu};
}

// First-order minorant of the convex side of one SIC order condition in
// log-power variables. The condition reads
//   sum_i lhs_coef[i] e^{x_i} - lhs_const <= F(x),
// with F(x) = sum_i rhs_coef[i] e^{x_i}; the minorant replaces F by its
// tangent plane at x_ref.
struct OrderLinearization {
  int beam;
  int earlier;
  int later;
  std::vector<double> lhs_coef;
  double lhs_const = 0.0;
  std::vector<double> rhs_coef;
  double rhs_value = 0.0;          // F(x_ref)
  std::vector<double> rhs_grad;    // dF/dx_i at x_ref
  std::vector<double> x_ref;

  double convex_rhs(const std::vector<double>& x) const {
    double f = 0.0;
    for (std::size_t i = 0; i < rhs_coef.size(); ++i) f += rhs_coef[i] * std::exp(x[i]);
    return f;
  }

  double linear_rhs(const std::vector<double>& x) const {
    double f = rhs_value;
    for (std::size_t i = 0; i < rhs_grad.size(); ++i) f += rhs_grad[i] * (x[i] - x_ref[i]);
    return f;
  }
};

inline std::vector<OrderLinearization> linearize_order_constraint(const std::vector<double>& x_ref,
                                                                  const GainMatrix& g,
                                                                  const Assignment& a,
                                                                  double sigma2) {
  const std::vector<int> users = a.stacked_users();
  const std::size_t n = users.size();
  if (x_ref.size() != n) throw std::invalid_argument("linearize_order_constraint: size mismatch");
  std::vector<int> beam_of_stacked(n);
  {
    std::size_t s = 0;
    for (std::size_t m = 0; m < a.num_beams(); ++m) {
      for (std::size_t i = 0; i < a.order[m].size(); ++i) beam_of_stacked[s++] = static_cast<int>(m);
    }
  }

  std::vector<OrderLinearization> out;
  for (std::size_t m = 0; m < a.num_beams(); ++m) {
    const auto& beam = a.order[m];
    for (std::size_t jp = 0; jp < beam.size(); ++jp) {
      for (std::size_t kp = jp + 1; kp < beam.size(); ++kp) {
        const std::size_t j = static_cast<std::size_t>(beam[jp]);
        const std::size_t k = static_cast<std::size_t>(beam[kp]);
        OrderLinearization lin;
        lin.beam = static_cast<int>(m);
        lin.earlier = beam[jp];
        lin.later = beam[kp];
        lin.lhs_coef.assign(n, 0.0);
        lin.rhs_coef.assign(n, 0.0);
        lin.rhs_grad.assign(n, 0.0);
        lin.x_ref = x_ref;
        lin.lhs_const = (g(k, m) - g(j, m)) * sigma2;
        for (std::size_t c = 0; c < n; ++c) {
          const std::size_t cm = static_cast<std::size_t>(beam_of_stacked[c]);
          if (cm == m) continue;
          lin.lhs_coef[c] = g(j, m) * g(k, cm);
          lin.rhs_coef[c] = g(k, m) * g(j, cm);
          const double e = std::exp(x_ref[c]);
          lin.rhs_value += lin.rhs_coef[c] * e;
          lin.rhs_grad[c] = lin.rhs_coef[c] * e;
        }
        out.push_back(std::move(lin));
      }
    }
  }
  return out;
}

struct ScaState {
  std::vector<double> x;   // stacked log powers
  std::vector<double> mu;
  std::vector<double> nu;
  std::vector<double> objective_history;
  int iteration = 0;
};

struct ScaReport {
  PowerAllocation power;
  double sum_rate = 0.0;
  int iterations = 0;
  bool converged = false;
  bool feasible = true;
  std::vector<double> objective_history;
};

namespace detail {

// Interference profile in stacked space: denom_s(x) = sum_i w[s][i] e^{x_i} + sigma2.
struct StackedProblem {
  std::size_t n = 0;
  std::vector<double> own_gain;             // g_{j_m}^m per stacked user
  std::vector<std::vector<double>> weight;  // interference weights w[s][i]
  double sigma2 = 1.0;

  double denom(std::size_t s, const std::vector<double>& x) const {
    double d = sigma2;
    for (std::size_t i = 0; i < n; ++i) {
      if (weight[s][i] != 0.0) d += weight[s][i] * std::exp(x[i]);
    }
    return d;
  }

  double ln_sinr(std::size_t s, const std::vector<double>& x) const {
    return std::log(own_gain[s]) + x[s] - std::log(denom(s, x));
  }

  void ln_sinr_grad(std::size_t s, const std::vector<double>& x, std::vector<double>& grad,
                    double factor) const {
    const double d = denom(s, x);
    grad[s] += factor;
    for (std::size_t i = 0; i < n; ++i) {
      if (weight[s][i] != 0.0) grad[i] -= factor * weight[s][i] * std::exp(x[i]) / d;
    }
  }
};

inline StackedProblem make_stacked_problem(const GainMatrix& g, const Assignment& a,
                                           double sigma2) {
  const std::vector<int> users = a.stacked_users();
  StackedProblem sp;
  sp.n = users.size();
  sp.sigma2 = sigma2;
  sp.own_gain.assign(sp.n, 0.0);
  sp.weight.assign(sp.n, std::vector<double>(sp.n, 0.0));
  std::vector<int> beam_of_stacked(sp.n);
  std::vector<std::pair<std::size_t, std::size_t>> beam_span(a.num_beams());
  {
    std::size_t s = 0;
    for (std::size_t m = 0; m < a.num_beams(); ++m) {
      beam_span[m] = {s, s + a.order[m].size()};
      for (std::size_t i = 0; i < a.order[m].size(); ++i) beam_of_stacked[s++] = static_cast<int>(m);
    }
  }
  for (std::size_t s = 0; s < sp.n; ++s) {
    const std::size_t user = static_cast<std::size_t>(users[s]);
    const std::size_t m = static_cast<std::size_t>(beam_of_stacked[s]);
    sp.own_gain[s] = std::max(g(user, m), 1e-300);
    for (std::size_t i = 0; i < sp.n; ++i) {
      if (i == s) continue;
      const std::size_t im = static_cast<std::size_t>(beam_of_stacked[i]);
      if (im == m) {
        if (i > s) sp.weight[s][i] = g(user, m);  // decoded later on the same beam
      } else {
        sp.weight[s][i] = g(user, im);
      }
    }
  }
  return sp;
}

// One smooth constraint c(x) <= 0 for the barrier solver, already shifted
// and normalized so the anchor is strictly interior.
struct BarrierConstraint {
  std::function<double(const std::vector<double>&)> value;
  std::function<void(const std::vector<double>&, std::vector<double>&)> add_grad;  // d c/dx
};

struct BarrierResult {
  std::vector<double> x;
  double kkt_residual = 0.0;
};

/// Maximizes a smooth concave objective subject to convex constraints via a
/// log-barrier with damped Newton steps (finite-difference Hessian). The
/// anchor must be strictly feasible.
inline BarrierResult barrier_maximize(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& objective_grad,
    const std::vector<BarrierConstraint>& constraints, std::vector<double> x) {
  const std::size_t n = x.size();

  auto barrier_value = [&](const std::vector<double>& p, double t_b, bool* ok) -> double {
    double phi = -t_b * objective(p);
    for (const auto& c : constraints) {
      const double v = c.value(p);
      if (v >= 0.0) {
        *ok = false;
        return std::numeric_limits<double>::infinity();
      }
      phi -= std::log(-v);
    }
    *ok = true;
    return phi;
  };

  auto barrier_grad = [&](const std::vector<double>& p, double t_b) -> std::vector<double> {
    std::vector<double> grad(n, 0.0);
    std::vector<double> og(n, 0.0);
    objective_grad(p, og);
    for (std::size_t i = 0; i < n; ++i) grad[i] = -t_b * og[i];
    for (const auto& c : constraints) {
      const double v = c.value(p);
      std::vector<double> cg(n, 0.0);
      c.add_grad(p, cg);
      for (std::size_t i = 0; i < n; ++i) grad[i] += cg[i] / (-v);
    }
    return grad;
  };

  // Centering prelude: the anchor may sit on a constraint boundary, where
  // the finite-difference Hessian below would straddle the infeasible side.
  // Pure gradient steps on the barrier sum move it to a centered interior
  // point first (constraints are normalized, so slack is relative).
  {
    auto min_slack = [&](const std::vector<double>& p) {
      double s = std::numeric_limits<double>::infinity();
      for (const auto& c : constraints) s = std::min(s, -c.value(p));
      return s;
    };
    for (int it = 0; it < 40 && min_slack(x) < 1e-3; ++it) {
      std::vector<double> grad(n, 0.0);
      for (const auto& c : constraints) {
        const double v = c.value(x);
        std::vector<double> cg(n, 0.0);
        c.add_grad(x, cg);
        for (std::size_t i = 0; i < n; ++i) grad[i] += cg[i] / (-v);
      }
      double gnorm = 0.0;
      for (double v : grad) gnorm = std::max(gnorm, std::abs(v));
      if (gnorm <= 1e-12) break;
      std::vector<double> trial(n);
      bool moved = false;
      for (double alpha = 1.0 / gnorm; alpha > 1e-16 / gnorm; alpha *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] - alpha * grad[i];
        if (min_slack(trial) > min_slack(x)) {
          x = trial;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
  }

  double t_b = 1.0;
  for (int outer = 0; outer < 12; ++outer, t_b *= 10.0) {
    for (int inner = 0; inner < 60; ++inner) {
      const std::vector<double> grad = barrier_grad(x, t_b);
      double gnorm = 0.0;
      for (double v : grad) gnorm = std::max(gnorm, std::abs(v));
      if (gnorm <= 1e-9 * std::max(1.0, t_b)) break;

      // Finite-difference Hessian of the barrier gradient.
      Matrix hess(n, n);
      std::vector<double> xp = x;
      for (std::size_t j = 0; j < n; ++j) {
        const double h = 1e-6 * (1.0 + std::abs(x[j]));
        xp[j] = x[j] + h;
        const std::vector<double> gp = barrier_grad(xp, t_b);
        xp[j] = x[j] - h;
        const std::vector<double> gm = barrier_grad(xp, t_b);
        xp[j] = x[j];
        for (std::size_t i = 0; i < n; ++i) hess(i, j) = (gp[i] - gm[i]) / (2.0 * h);
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          const double s = 0.5 * (hess(i, j) + hess(j, i));
          hess(i, j) = s;
          hess(j, i) = s;
        }
        hess(i, i) += 1e-12 * std::max(1.0, std::abs(hess(i, i)));
      }

      std::vector<double> rhs(n);
      for (std::size_t i = 0; i < n; ++i) rhs[i] = -grad[i];
      auto step = solve_linear(hess, rhs);
      double descent = 0.0;
      if (step) {
        for (std::size_t i = 0; i < n; ++i) descent += grad[i] * (*step)[i];
      }
      std::vector<double> dir;
      if (step && descent < 0.0) {
        dir = *step;
      } else {
        dir.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) dir[i] = -grad[i];
        descent = 0.0;
        for (std::size_t i = 0; i < n; ++i) descent -= grad[i] * grad[i];
      }

      bool ok = false;
      const double phi0 = barrier_value(x, t_b, &ok);
      double alpha = 1.0;
      std::vector<double> trial(n);
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt, alpha *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + alpha * dir[i];
        bool feas = false;
        const double phi1 = barrier_value(trial, t_b, &feas);
        if (feas && phi1 <= phi0 + 1e-4 * alpha * descent) {
          x = trial;
          moved = true;
          break;
        }
      }
      if (!moved) break;

      double step_norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) step_norm = std::max(step_norm, std::abs(alpha * dir[i]));
      if (step_norm < 1e-13 * (1.0 + std::abs(x[0]))) break;
    }
  }

  BarrierResult res;
  res.x = x;
  const std::vector<double> grad = barrier_grad(x, t_b / 10.0);
  double gnorm = 0.0;
  for (double v : grad) gnorm = std::max(gnorm, std::abs(v));
  res.kkt_residual = gnorm / (t_b / 10.0);
  return res;
}

}  // namespace detail

/// Solves the convex SCA subproblem anchored at state.x: concave logarithmic
/// surrogate objective, power budget, surrogate QoS floors, and linearized
/// SIC order conditions. Returns the new log-power point.
inline std::vector<double> solve_subproblem(const ScaState& state, const GainMatrix& g,
                                            const Assignment& a, double p_tot, double sigma2,
                                            const std::vector<double>& r_min) {
  const detail::StackedProblem sp = detail::make_stacked_problem(g, a, sigma2);
  const std::size_t n = sp.n;
  const std::vector<int> users = a.stacked_users();
  const std::vector<double>& mu = state.mu;

  auto objective = [&, sp](const std::vector<double>& x) {
    double f = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (mu[s] > 0.0) f += (mu[s] * sp.ln_sinr(s, x) + state.nu[s]) / std::numbers::ln2;
    }
    return f;
  };
  auto objective_grad = [&, sp](const std::vector<double>& x, std::vector<double>& grad) {
    for (std::size_t s = 0; s < n; ++s) {
      if (mu[s] > 0.0) sp.ln_sinr_grad(s, x, grad, mu[s] / std::numbers::ln2);
    }
  };

  std::vector<detail::BarrierConstraint> constraints;
  const std::vector<double>& x0 = state.x;

  // Every constraint is shifted by its (clamped) anchor slack plus a tiny
  // relative margin, so the anchor is strictly interior even when a
  // constraint is active there. The margin stays inside the project-wide
  // 1e-9 tolerance; boundary anchors are handled by the centering prelude
  // of the barrier solver.
  auto add_constraint = [&](std::function<double(const std::vector<double>&)> raw,
                            std::function<void(const std::vector<double>&, std::vector<double>&)>
                                raw_grad,
                            double scale, double margin_rel) {
    const double margin = margin_rel * scale;
    const double anchor = raw(x0);
    const double shift = std::max(0.0, anchor) + margin;
    detail::BarrierConstraint c;
    c.value = [raw, shift, scale](const std::vector<double>& x) {
      return (raw(x) - shift) / scale;
    };
    c.add_grad = [raw_grad, scale](const std::vector<double>& x, std::vector<double>& grad) {
      std::vector<double> tmp(grad.size(), 0.0);
      raw_grad(x, tmp);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += tmp[i] / scale;
    };
    constraints.push_back(std::move(c));
  };

  // Power budget.
  add_constraint(
      [p_tot](const std::vector<double>& x) {
        double s = -p_tot;
        for (double xi : x) s += std::exp(xi);
        return s;
      },
      [](const std::vector<double>& x, std::vector<double>& grad) {
        for (std::size_t i = 0; i < x.size(); ++i) grad[i] += std::exp(x[i]);
      },
      p_tot, 1e-10);

  // QoS floors in their exact convex form: ln(gamma_bar) - ln SINR(x) <= 0
  // is log-sum-exp minus affine, hence convex in the log powers.
  for (std::size_t s = 0; s < n; ++s) {
    const double r_floor = r_min[static_cast<std::size_t>(users[s])];
    if (r_floor <= 0.0) continue;
    const double ln_gamma = std::log(std::exp2(r_floor) - 1.0);
    add_constraint(
        [&sp, s, ln_gamma](const std::vector<double>& x) {
          return ln_gamma - sp.ln_sinr(s, x);
        },
        [&sp, s](const std::vector<double>& x, std::vector<double>& grad) {
          sp.ln_sinr_grad(s, x, grad, -1.0);
        },
        std::max(1.0, std::abs(ln_gamma)), 1e-10);
  }

  // Linearized SIC order conditions.
  const std::vector<OrderLinearization> order = linearize_order_constraint(x0, g, a, sigma2);
  for (const OrderLinearization& lin : order) {
    bool has_cross = false;
    for (double c : lin.lhs_coef) {
      if (c != 0.0) has_cross = true;
    }
    if (!has_cross) continue;  // single-beam pair: constant condition, checked upstream
    double scale = std::abs(lin.lhs_const) + std::abs(lin.rhs_value);
    for (std::size_t i = 0; i < n; ++i) scale += std::abs(lin.lhs_coef[i]) * std::exp(x0[i]);
    scale = std::max(scale, 1e-300);
    add_constraint(
        [lin](const std::vector<double>& x) {
          double lhs = -lin.lhs_const;
          for (std::size_t i = 0; i < lin.lhs_coef.size(); ++i) {
            lhs += lin.lhs_coef[i] * std::exp(x[i]);
          }
          return lhs - lin.linear_rhs(x);
        },
        [lin](const std::vector<double>& x, std::vector<double>& grad) {
          for (std::size_t i = 0; i < lin.lhs_coef.size(); ++i) {
            grad[i] += lin.lhs_coef[i] * std::exp(x[i]) - lin.rhs_grad[i];
          }
        },
        scale, 1e-10);
  }

  detail::BarrierResult res = detail::barrier_maximize(objective, objective_grad, constraints, x0);
  // Ascent contract: fall back to the anchor when numerics went backwards.
  if (objective(res.x) < objective(x0)) return x0;
  return res.x;
}

namespace detail {

/// Picks a strictly positive, order-respecting starting allocation: the
/// minimal-power point scaled up toward the budget as far as the SIC order
/// margins allow.
inline std::vector<double> sca_initial_point(const GainMatrix& g, const Assignment& a,
                                             const std::vector<double>& beta_min, double p_tot,
                                             double sigma2) {
  const std::size_t n = beta_min.size();
  double total = 0.0;
  for (double b : beta_min) total += b;

  std::vector<double> base = beta_min;
  if (total <= 1e-12 * p_tot) {
    base.assign(n, p_tot / static_cast<double>(n));
    total = p_tot;
  }
  const double floor = 1e-12 * p_tot / static_cast<double>(n);
  for (double& b : base) b = std::max(b, floor);
  total = 0.0;
  for (double b : base) total += b;

  const double s_max = 0.9999 * p_tot / total;
  double s = std::max(1.0, s_max);
  auto margins_ok = [&](double scale) {
    std::vector<double> beta(n);
    for (std::size_t i = 0; i < n; ++i) beta[i] = scale * base[i];
    return sic_order_ok(g, a, unstack_powers(a, beta), sigma2).ok;
  };
  if (!margins_ok(s)) {
    double lo = total <= 1e-12 * p_tot ? 1e-6 : 1.0;
    double hi = s;
    if (!margins_ok(lo)) {
      lo = 1e-9;  // shrink toward zero power, where margins are gain-dominated
    }
    for (int it = 0; it < 60 && !margins_ok(lo); ++it) lo *= 0.5;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (margins_ok(mid)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    s = lo;
  }
  std::vector<double> beta(n);
  for (std::size_t i = 0; i < n; ++i) beta[i] = s * base[i];
  return beta;
}

/// Concentrated starting allocation: earlier-decoded users pinned at their
/// QoS floors, each beam's last-decoded user raised to the largest common
/// fraction of its single-user SINR cap that stays feasible. Mirrors the
/// structure of sum-rate optima, which give the leftover power to the
/// last-decoded users.
inline std::optional<std::vector<double>> sca_concentrated_point(const GainMatrix& g,
                                                                 const Assignment& a,
                                                                 const std::vector<double>& r_min,
                                                                 double p_tot, double sigma2) {
  const std::vector<int> users = a.stacked_users();
  const std::size_t n = users.size();
  SinrTarget floors = qos_floors(a, r_min);

  // Stacked index and single-user SINR cap of each beam's last-decoded user.
  std::vector<std::pair<std::size_t, double>> last;
  {
    std::size_t s = 0;
    for (std::size_t m = 0; m < a.num_beams(); ++m) {
      if (a.order[m].empty()) continue;
      s += a.order[m].size();
      const std::size_t u = static_cast<std::size_t>(a.order[m].back());
      last.push_back({s - 1, g(u, m) * p_tot / sigma2});
    }
  }

  std::optional<std::vector<double>> best;
  auto try_scale = [&](double scale) {
    SinrTarget t = floors;
    for (const auto& [idx, cap] : last) t.gamma[idx] = std::max(t.gamma[idx], scale * cap);
    const FeasMatrices mats = build_matrices(g, a, t);
    if (spectral_radius(mats.system_matrix()) >= 1.0) return false;
    const std::vector<double> beta = min_power_for_targets(mats, sigma2);
    double total = 0.0;
    for (double b : beta) total += b;
    if (total > 0.9999 * p_tot) return false;
    if (!sic_order_ok(g, a, unstack_powers(a, beta), sigma2).ok) return false;
    best = beta;
    return true;
  };

  double lo = 1e-9;
  if (!try_scale(lo)) return std::nullopt;
  double hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = std::sqrt(lo * hi);  // scales span orders of magnitude
    if (try_scale(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Strictly positive entries so the log-power transform stays finite.
  const double floor = 1e-12 * p_tot / static_cast<double>(n);
  for (double& b : *best) b = std::max(b, floor);
  return best;
}

}  // namespace detail

struct ScaOptions {
  int max_iters = 60;
};

namespace detail {

// Outcome of one ascent run from a single starting allocation.
struct ScaRunResult {
  PowerAllocation power;
  double sum_rate = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;
};

inline ScaRunResult sca_run(const GainMatrix& g, const Assignment& a,
                            const std::vector<double>& r_min, double p_tot, double sigma2,
                            double epsilon_prime, const ScaOptions& opts, std::vector<double> beta);

}  // namespace detail

/// Algorithm: tighten the log bound at the current SINRs, re-linearize the
/// order conditions, solve the convex subproblem, repeat until the relative
/// sum-rate change drops below epsilon_prime.
inline ScaReport solve_sca(const GainMatrix& g, const Assignment& a,
                           const std::vector<double>& r_min, double p_tot, double sigma2,
                           double epsilon_prime, ScaOptions opts = {}) {
  ScaReport report;
  report.power = PowerAllocation(a.num_users());
  const std::size_t n = a.scheduled_count();
  if (n == 0) {
    report.converged = true;
    return report;
  }

  const FeasVerdict feas = check_qos_feasible(g, a, r_min, p_tot, sigma2);
  if (!feas.member) {
    report.feasible = false;
    return report;
  }

  const std::vector<int> users = a.stacked_users();
  std::vector<double> beta_min(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    beta_min[s] = feas.min_power->beta[static_cast<std::size_t>(users[s])];
  }

  // The iteration is a local ascent; run it from the scaled fair point and
  // from the concentrated point and keep the better outcome.
  std::vector<std::vector<double>> starts;
  starts.push_back(detail::sca_initial_point(g, a, beta_min, p_tot, sigma2));
  if (auto conc = detail::sca_concentrated_point(g, a, r_min, p_tot, sigma2)) {
    starts.push_back(std::move(*conc));
  }

  bool have_result = false;
  for (std::vector<double>& beta : starts) {
    const detail::ScaRunResult run =
        detail::sca_run(g, a, r_min, p_tot, sigma2, epsilon_prime, opts, beta);
    if (!have_result || run.sum_rate > report.sum_rate) {
      have_result = true;
      report.power = run.power;
      report.sum_rate = run.sum_rate;
      report.iterations = run.iterations;
      report.converged = run.converged;
      report.objective_history = run.objective_history;
    }
  }
  return report;
}

namespace detail {

inline ScaRunResult sca_run(const GainMatrix& g, const Assignment& a,
                            const std::vector<double>& r_min, double p_tot, double sigma2,
                            double epsilon_prime, const ScaOptions& opts,
                            std::vector<double> beta) {
  const std::size_t n = beta.size();
  const std::vector<int> users = a.stacked_users();
  ScaRunResult report;

  ScaState state;
  state.x.resize(n);
  state.mu.assign(n, 0.0);
  state.nu.assign(n, 0.0);

  PowerAllocation best = unstack_powers(a, beta);
  double phi = achievable_rates(g, a, best, sigma2).sum_rate();
  state.objective_history.push_back(phi);

  for (int t = 1; t <= opts.max_iters; ++t) {
    state.iteration = t;
    const RateVector rates = achievable_rates(g, a, best, sigma2);
    for (std::size_t s = 0; s < n; ++s) {
      const double tau = rates.sinr[static_cast<std::size_t>(users[s])];
      if (tau > 0.0) {
        const BoundCoeffs bc = tighten_bound(tau);
        state.mu[s] = bc.mu;
        state.nu[s] = bc.nu;
      } else {
        state.mu[s] = 0.0;
        state.nu[s] = 0.0;
      }
      state.x[s] = std::log(std::max(beta[s], 1e-300));
    }

    const std::vector<double> x_new = solve_subproblem(state, g, a, p_tot, sigma2, r_min);

    // The bound-tightening step contracts geometrically toward its fixed
    // point, so extrapolate along the step direction and keep the best point
    // that satisfies the original constraints.
    auto realize = [&](double alpha, std::vector<double>& beta_out) {
      double total = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        beta_out[s] = std::exp(state.x[s] + alpha * (x_new[s] - state.x[s]));
        total += beta_out[s];
      }
      // Rescale only on a real overshoot: a uniform shrink also shrinks every
      // SINR, which would knock users sitting exactly on their floors below
      // them.
      if (total > p_tot * (1.0 + 1e-9)) {
        const double fix = p_tot / total;
        for (double& b : beta_out) b *= fix;
      }
    };
    std::vector<double> beta_new(n);
    double phi_new = -1.0;
    bool ok = false;
    std::vector<double> beta_try(n);
    for (double alpha : {1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0}) {
      realize(alpha, beta_try);
      const PowerAllocation p_try = unstack_powers(a, beta_try);
      const RateVector r_try = achievable_rates(g, a, p_try, sigma2);
      const double phi_try = r_try.sum_rate();
      if (phi_try <= phi_new) continue;
      if (!sic_order_ok(g, a, p_try, sigma2).ok || !qos_ok(r_try, a, r_min)) continue;
      phi_new = phi_try;
      beta_new = beta_try;
      ok = true;
    }
    const PowerAllocation cand = ok ? unstack_powers(a, beta_new) : best;
    ok = ok && phi_new >= phi - 1e-9;
    report.iterations = t;
    if (!ok) {
      report.converged = true;  // no admissible progress from this anchor
      break;
    }
    beta = beta_new;
    best = cand;
    const double prev = phi;
    phi = std::max(phi, phi_new);
    state.objective_history.push_back(phi);
    if (std::abs(phi - prev) / std::max(std::abs(prev), 1e-12) <= epsilon_prime) {
      report.converged = true;
      break;
    }
  }

  report.power = best;
  report.sum_rate = phi;
  report.objective_history = state.objective_history;
  return report;
}

}  // namespace detail

/// Result of the decode-order search: the order that was kept and the
/// solver report obtained with it.
struct OrderSearchedSca {
  Assignment assignment;
  ScaReport report;
};

/// Treats the per-beam decode order as part of the optimization: seeds with
/// the ascending-raw-gain and the interference-normalized orders (the latter
/// at a uniform per-beam power profile), then greedily tries adjacent decode
/// transpositions in each beam, keeping any order whose solve improves the
/// sum rate. The decode order fixes the sign pattern of the SIC order
/// conditions, so a poor order can cap the usable power budget far below
/// P_tot; this search recovers those instances at the cost of a handful of
/// extra solves.
inline OrderSearchedSca solve_sca_order_search(const GainMatrix& g, const Assignment& schedule,
                                               const std::vector<double>& r_min, double p_tot,
                                               double sigma2, double epsilon_prime,
                                               ScaOptions opts = {}) {
  const std::size_t beams = schedule.num_beams();
  OrderSearchedSca best;
  best.assignment = schedule;
  order_by_ascending_gain(best.assignment, g);
  best.report.feasible = false;

  auto consider = [&](const Assignment& a) {
    const ScaReport rep = solve_sca(g, a, r_min, p_tot, sigma2, epsilon_prime, opts);
    if (rep.feasible && (!best.report.feasible || rep.sum_rate > best.report.sum_rate)) {
      best.assignment = a;
      best.report = rep;
      return true;
    }
    return false;
  };

  Assignment ascending = best.assignment;
  consider(ascending);

  Assignment normalized = schedule;
  std::vector<double> uniform(beams, p_tot / static_cast<double>(beams));
  order_by_effective_gain(normalized, g, uniform, sigma2);
  if (normalized.order != ascending.order) consider(normalized);

  if (best.report.feasible) {
    bool improved = true;
    for (int pass = 0; pass < 3 && improved; ++pass) {
      improved = false;
      for (std::size_t m = 0; m < beams; ++m) {
        const std::size_t q = best.assignment.order[m].size();
        for (std::size_t i = 0; i + 1 < q; ++i) {
          Assignment trial = best.assignment;
          std::swap(trial.order[m][i], trial.order[m][i + 1]);
          if (consider(trial)) improved = true;
        }
      }
    }
  }
  return best;
}

}  // namespace mmnoma
