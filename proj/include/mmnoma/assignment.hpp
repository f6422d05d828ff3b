#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mmnoma/channel.hpp"

namespace mmnoma {

// User-to-beam schedule plus the per-beam SIC decoding order. order[m] lists
// beam m's users with position 0 decoded first.
struct Assignment {
  std::vector<int> beam_of;              // size K, -1 = unscheduled
  std::vector<std::vector<int>> order;   // per beam, decode order
  std::vector<int> quotas;               // q_m

  std::size_t num_beams() const { return order.size(); }
  std::size_t num_users() const { return beam_of.size(); }

  std::size_t scheduled_count() const {
    std::size_t n = 0;
    for (const auto& beam : order) n += beam.size();
    return n;
  }

  /// Decode position of user k on its beam, or -1 if unscheduled.
  int position_of(int user) const {
    const int m = beam_of[static_cast<std::size_t>(user)];
    if (m < 0) return -1;
    const auto& beam = order[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i < beam.size(); ++i) {
      if (beam[i] == user) return static_cast<int>(i);
    }
    return -1;
  }

  /// Scheduled users in global decoding-stacked order: beam 0's users in
  /// decode order, then beam 1's, ...
  std::vector<int> stacked_users() const {
    std::vector<int> users;
    users.reserve(scheduled_count());
    for (const auto& beam : order) users.insert(users.end(), beam.begin(), beam.end());
    return users;
  }

  /// Checks structural consistency: each user on at most one beam, order
  /// lists match beam_of, quotas not exceeded.
  bool valid() const {
    std::vector<int> seen(beam_of.size(), 0);
    for (std::size_t m = 0; m < order.size(); ++m) {
      if (!quotas.empty() && order[m].size() > static_cast<std::size_t>(quotas[m])) return false;
      for (int u : order[m]) {
        if (u < 0 || static_cast<std::size_t>(u) >= beam_of.size()) return false;
        if (seen[static_cast<std::size_t>(u)]++) return false;
        if (beam_of[static_cast<std::size_t>(u)] != static_cast<int>(m)) return false;
      }
    }
    for (std::size_t k = 0; k < beam_of.size(); ++k) {
      if (beam_of[k] >= 0 && seen[k] != 1) return false;
    }
    return true;
  }
};

/// Builds an assignment from per-beam user lists; decode order as listed.
inline Assignment make_assignment(std::size_t num_users,
                                  std::vector<std::vector<int>> beams,
                                  std::vector<int> quotas = {}) {
  Assignment a;
  a.beam_of.assign(num_users, -1);
  a.order = std::move(beams);
  if (quotas.empty()) {
    for (const auto& beam : a.order) quotas.push_back(static_cast<int>(beam.size()));
  }
  a.quotas = std::move(quotas);
  for (std::size_t m = 0; m < a.order.size(); ++m) {
    for (int u : a.order[m]) a.beam_of[static_cast<std::size_t>(u)] = static_cast<int>(m);
  }
  if (!a.valid()) throw std::invalid_argument("make_assignment: inconsistent schedule");
  return a;
}

/// Empty schedule over the given beam count and quotas.
inline Assignment make_assignment(std::size_t num_users, std::size_t num_beams,
                                  std::vector<int> quotas) {
  Assignment a;
  a.beam_of.assign(num_users, -1);
  a.order.assign(num_beams, {});
  if (quotas.empty()) quotas.assign(num_beams, static_cast<int>(num_users));
  if (quotas.size() != num_beams) {
    throw std::invalid_argument("make_assignment: quota size mismatch");
  }
  a.quotas = std::move(quotas);
  return a;
}

/// Reorders every beam's users by ascending own-beam gain (weakest decoded
/// first), the decoding convention used by all suboptimal pipelines.
inline void order_by_ascending_gain(Assignment& a, const GainMatrix& g) {
  for (std::size_t m = 0; m < a.order.size(); ++m) {
    auto& beam = a.order[m];
    std::sort(beam.begin(), beam.end(), [&](int u, int v) {
      const double gu = g(static_cast<std::size_t>(u), m);
      const double gv = g(static_cast<std::size_t>(v), m);
      if (gu != gv) return gu < gv;
      return u < v;
    });
  }
}

/// Reorders every beam's users by ascending interference-normalized gain
/// g_k^m / (sigma^2 + sum_{n != m} g_k^n beam_power[n]). Cross-beam
/// interference can invert the raw-gain order, and the SIC decode conditions
/// require the decode order to follow the interference-normalized one, so
/// ordering against a reference per-beam power profile keeps those conditions
/// loose where the raw-gain order would choke them.
inline void order_by_effective_gain(Assignment& a, const GainMatrix& g,
                                    const std::vector<double>& beam_power, double sigma2) {
  if (beam_power.size() != a.num_beams()) {
    throw std::invalid_argument("order_by_effective_gain: beam power size mismatch");
  }
  for (std::size_t m = 0; m < a.order.size(); ++m) {
    auto& beam = a.order[m];
    auto effective = [&](int k) {
      double denom = sigma2;
      for (std::size_t n = 0; n < a.num_beams(); ++n) {
        if (n != m) denom += g(static_cast<std::size_t>(k), n) * beam_power[n];
      }
      return g(static_cast<std::size_t>(k), m) / denom;
    };
    std::sort(beam.begin(), beam.end(), [&](int u, int v) {
      const double eu = effective(u);
      const double ev = effective(v);
      if (eu != ev) return eu < ev;
      return u < v;
    });
  }
}

// Per-user transmit powers in Watts; zero for unscheduled users.
struct PowerAllocation {
  std::vector<double> beta;  // size K

  explicit PowerAllocation(std::size_t num_users = 0) : beta(num_users, 0.0) {}

  double total() const {
    double s = 0.0;
    for (double b : beta) s += b;
    return s;
  }

  /// beta^m = sum of the beam's scheduled users' powers.
  double beam_total(const Assignment& a, std::size_t m) const {
    double s = 0.0;
    for (int u : a.order[m]) s += beta[static_cast<std::size_t>(u)];
    return s;
  }

  bool nonnegative() const {
    for (double b : beta) {
      if (b < 0.0) return false;
    }
    return true;
  }
};

/// Expands a decoding-stacked power vector back onto user indices.
inline PowerAllocation unstack_powers(const Assignment& a, const std::vector<double>& stacked) {
  PowerAllocation p(a.num_users());
  const std::vector<int> users = a.stacked_users();
  if (users.size() != stacked.size()) throw std::invalid_argument("unstack_powers: size mismatch");
  for (std::size_t s = 0; s < users.size(); ++s) {
    p.beta[static_cast<std::size_t>(users[s])] = stacked[s];
  }
  return p;
}

}  // namespace mmnoma
