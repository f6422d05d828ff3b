#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mmnoma/assignment.hpp"
#include "mmnoma/channel.hpp"

namespace mmnoma {

// Achieved SINR and rate per scheduled user, indexed by user id.
struct RateVector {
  std::vector<double> sinr;  // size K, 0 for unscheduled
  std::vector<double> rate;  // log2(1 + sinr)

  double sum_rate() const {
    double s = 0.0;
    for (double r : rate) s += r;
    return s;
  }
};

/// SINR of user `decoder` decoding the message of user `owner`, both
/// scheduled on beam m with owner decoded no later than decoder.
inline double decode_sinr(const GainMatrix& g, const Assignment& a, const PowerAllocation& p,
                          int decoder, int owner, int beam, double sigma2) {
  const std::size_t m = static_cast<std::size_t>(beam);
  const int pos_owner = a.position_of(owner);
  const int pos_decoder = a.position_of(decoder);
  if (pos_owner < 0 || pos_decoder < 0 || a.beam_of[static_cast<std::size_t>(owner)] != beam ||
      a.beam_of[static_cast<std::size_t>(decoder)] != beam) {
    throw std::invalid_argument("decode_sinr: users not scheduled on the given beam");
  }
  if (pos_owner > pos_decoder) {
    throw std::invalid_argument("decode_sinr: owner must be decoded no later than decoder");
  }
  const std::size_t k = static_cast<std::size_t>(decoder);
  double intra = 0.0;
  const auto& beam_order = a.order[m];
  for (std::size_t i = static_cast<std::size_t>(pos_owner) + 1; i < beam_order.size(); ++i) {
    intra += p.beta[static_cast<std::size_t>(beam_order[i])];
  }
  double inter = 0.0;
  for (std::size_t n = 0; n < a.num_beams(); ++n) {
    if (n == m) continue;
    inter += g(k, n) * p.beam_total(a, n);
  }
  const double denom = g(k, m) * intra + inter + sigma2;
  return g(k, m) * p.beta[static_cast<std::size_t>(owner)] / denom;
}

/// Per-user achievable SINR and rate (each user decoding its own message).
inline RateVector achievable_rates(const GainMatrix& g, const Assignment& a,
                                   const PowerAllocation& p, double sigma2) {
  if (!p.nonnegative()) throw std::invalid_argument("achievable_rates: negative power");
  RateVector rv;
  rv.sinr.assign(a.num_users(), 0.0);
  rv.rate.assign(a.num_users(), 0.0);
  for (std::size_t m = 0; m < a.num_beams(); ++m) {
    for (int u : a.order[m]) {
      const double s = decode_sinr(g, a, p, u, u, static_cast<int>(m), sigma2);
      rv.sinr[static_cast<std::size_t>(u)] = s;
      rv.rate[static_cast<std::size_t>(u)] = std::log2(1.0 + s);
    }
  }
  return rv;
}

// One SIC order condition: for the pair (earlier j, later k) on beam m,
// sum_{n != m} (g_k^m g_j^n - g_j^m g_k^n) beta^n + (g_k^m - g_j^m) sigma^2 >= 0.
struct SicMargin {
  int beam;
  int earlier;  // user decoded first
  int later;
  double margin;     // signed LHS value
  double reference;  // magnitude scale for tolerance checks
};

struct SicCheck {
  bool ok = true;
  std::vector<SicMargin> margins;
};

inline SicCheck sic_order_ok(const GainMatrix& g, const Assignment& a, const PowerAllocation& p,
                             double sigma2, double rel_tol = 1e-9) {
  SicCheck check;
  const std::size_t num_beams = a.num_beams();
  std::vector<double> beam_totals(num_beams);
  for (std::size_t n = 0; n < num_beams; ++n) beam_totals[n] = p.beam_total(a, n);
  for (std::size_t m = 0; m < num_beams; ++m) {
    const auto& beam = a.order[m];
    for (std::size_t jp = 0; jp < beam.size(); ++jp) {
      for (std::size_t kp = jp + 1; kp < beam.size(); ++kp) {
        const std::size_t j = static_cast<std::size_t>(beam[jp]);
        const std::size_t k = static_cast<std::size_t>(beam[kp]);
        double margin = (g(k, m) - g(j, m)) * sigma2;
        double reference = (g(k, m) + g(j, m)) * sigma2;
        for (std::size_t n = 0; n < num_beams; ++n) {
          if (n == m) continue;
          const double coef = g(k, m) * g(j, n) - g(j, m) * g(k, n);
          margin += coef * beam_totals[n];
          reference += std::abs(coef) * beam_totals[n];
        }
        check.margins.push_back({static_cast<int>(m), beam[jp], beam[kp], margin, reference});
        if (margin < -rel_tol * reference) check.ok = false;
      }
    }
  }
  return check;
}

/// QoS: every scheduled user's rate at or above its floor (closed inequality).
inline bool qos_ok(const RateVector& rates, const Assignment& a, const std::vector<double>& r_min,
                   double tol = 1e-9) {
  for (std::size_t m = 0; m < a.num_beams(); ++m) {
    for (int u : a.order[m]) {
      if (rates.rate[static_cast<std::size_t>(u)] < r_min[static_cast<std::size_t>(u)] - tol) {
        return false;
      }
    }
  }
  return true;
}

inline std::vector<double> uniform_qos(std::size_t num_users, double r_th) {
  return std::vector<double>(num_users, r_th);
}

}  // namespace mmnoma
