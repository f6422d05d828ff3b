#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mmnoma/assignment.hpp"
#include "mmnoma/bb.hpp"
#include "mmnoma/feasibility.hpp"
#include "mmnoma/rates.hpp"
#include "mmnoma/rng.hpp"

namespace mmnoma {

// Strict rankings on scalar gains; ties broken toward the lower index.
struct PreferenceProfile {
  std::vector<std::vector<int>> user_prefs;  // per user: beams, best first
  std::vector<std::vector<int>> beam_prefs;  // per beam: users, best first
};

inline PreferenceProfile build_preferences(const GainMatrix& g) {
  PreferenceProfile p;
  p.user_prefs.resize(g.num_users);
  p.beam_prefs.resize(g.num_beams);
  for (std::size_t k = 0; k < g.num_users; ++k) {
    auto& row = p.user_prefs[k];
    row.resize(g.num_beams);
    for (std::size_t m = 0; m < g.num_beams; ++m) row[m] = static_cast<int>(m);
    std::stable_sort(row.begin(), row.end(), [&](int a, int b) {
      return g(k, static_cast<std::size_t>(a)) > g(k, static_cast<std::size_t>(b));
    });
  }
  for (std::size_t m = 0; m < g.num_beams; ++m) {
    auto& col = p.beam_prefs[m];
    col.resize(g.num_users);
    for (std::size_t k = 0; k < g.num_users; ++k) col[k] = static_cast<int>(k);
    std::stable_sort(col.begin(), col.end(), [&](int a, int b) {
      return g(static_cast<std::size_t>(a), m) > g(static_cast<std::size_t>(b), m);
    });
  }
  return p;
}

// A many-to-one matching with its bookkeeping: the assignment itself, the
// candidate set of scheduled users, and which beams rejected which users.
struct Matching {
  Assignment assign;
  std::vector<char> candidate;                 // per user: eligible for swaps
  std::vector<std::vector<int>> rejected_by;   // per user: beams that rejected it

  std::size_t num_users() const { return assign.num_users(); }
};

// Per-beam power P_tot/M, intra-beam split geometric with ratio 1/3 per
// decoding rank (earlier-decoded, weaker user gets more). q=2 yields the
// (3/4, 1/4) split.
inline PowerAllocation fixed_power_allocation(const Assignment& a, double p_tot) {
  PowerAllocation p(a.num_users());
  const double per_beam = p_tot / static_cast<double>(a.num_beams());
  for (std::size_t m = 0; m < a.num_beams(); ++m) {
    const std::size_t q = a.order[m].size();
    if (q == 0) continue;
    double norm = 0.0;
    double w = 1.0;
    for (std::size_t r = 0; r < q; ++r, w /= 3.0) norm += w;
    w = 1.0;
    for (std::size_t r = 0; r < q; ++r, w /= 3.0) {
      p.beta[static_cast<std::size_t>(a.order[m][r])] = per_beam * w / norm;
    }
  }
  return p;
}

/// Achievable rate of user k on beam m under the fixed power rule applied to
/// the full matching, inter-beam interference included.
inline double preference_value_user(int k, int m, const Matching& phi, const GainMatrix& g,
                                    double p_tot, double sigma2) {
  if (phi.assign.beam_of[static_cast<std::size_t>(k)] != m) {
    throw std::invalid_argument("preference_value_user: user not on the given beam");
  }
  const PowerAllocation p = fixed_power_allocation(phi.assign, p_tot);
  const double s = decode_sinr(g, phi.assign, p, k, k, m, sigma2);
  return std::log2(1.0 + s);
}

inline double preference_value_beam(int m, const Matching& phi, const GainMatrix& g, double p_tot,
                                    double sigma2) {
  double sum = 0.0;
  for (int u : phi.assign.order[static_cast<std::size_t>(m)]) {
    sum += preference_value_user(u, m, phi, g, p_tot, sigma2);
  }
  return sum;
}

/// Deferred acceptance on the gain-based preference lists: users propose down
/// their lists; each beam keeps its best-ranked q_m proposers. Terminates when
/// every beam is full or every unmatched user has been rejected everywhere.
inline Matching deferred_acceptance(const GainMatrix& g, const std::vector<int>& quotas) {
  const std::size_t num_users = g.num_users;
  const std::size_t num_beams = g.num_beams;
  if (quotas.size() != num_beams) throw std::invalid_argument("deferred_acceptance: quota size");
  const PreferenceProfile prefs = build_preferences(g);

  std::vector<std::size_t> next_choice(num_users, 0);
  std::vector<int> held_beam(num_users, -1);
  std::vector<std::vector<int>> held(num_beams);
  std::vector<std::vector<int>> rejected_by(num_users);

  // Beam-side rank for O(1) comparisons.
  std::vector<std::vector<std::size_t>> rank(num_beams, std::vector<std::size_t>(num_users));
  for (std::size_t m = 0; m < num_beams; ++m) {
    for (std::size_t r = 0; r < num_users; ++r) {
      rank[m][static_cast<std::size_t>(prefs.beam_prefs[m][r])] = r;
    }
  }

  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t k = 0; k < num_users; ++k) {
      if (held_beam[k] != -1 || next_choice[k] >= num_beams) continue;
      const std::size_t m = static_cast<std::size_t>(prefs.user_prefs[k][next_choice[k]]);
      ++next_choice[k];
      progress = true;
      held[m].push_back(static_cast<int>(k));
      held_beam[k] = static_cast<int>(m);
      if (held[m].size() > static_cast<std::size_t>(quotas[m])) {
        auto worst = std::max_element(held[m].begin(), held[m].end(), [&](int a, int b) {
          return rank[m][static_cast<std::size_t>(a)] < rank[m][static_cast<std::size_t>(b)];
        });
        const int dropped = *worst;
        held[m].erase(worst);
        held_beam[static_cast<std::size_t>(dropped)] = -1;
        rejected_by[static_cast<std::size_t>(dropped)].push_back(static_cast<int>(m));
      }
    }
  }

  Matching phi;
  phi.assign = make_assignment(num_users, num_beams, quotas);
  for (std::size_t m = 0; m < num_beams; ++m) {
    std::sort(held[m].begin(), held[m].end());
    for (int u : held[m]) {
      phi.assign.beam_of[static_cast<std::size_t>(u)] = static_cast<int>(m);
      phi.assign.order[m].push_back(u);
    }
  }
  order_by_ascending_gain(phi.assign, g);
  phi.candidate.assign(num_users, 0);
  for (std::size_t k = 0; k < num_users; ++k) phi.candidate[k] = held_beam[k] != -1 ? 1 : 0;
  phi.rejected_by = std::move(rejected_by);
  return phi;
}

// One executed swap with the four agents' preference values before and after.
struct SwapRecord {
  int user_k;
  int user_j;
  int beam_m;
  int beam_n;
  double pre_user_k, post_user_k;
  double pre_user_j, post_user_j;
  double pre_beam_m, post_beam_m;
  double pre_beam_n, post_beam_n;
};

struct SwapResult {
  Matching matching;
  std::vector<SwapRecord> swaps;
  bool cap_hit = false;
};

namespace detail {

inline Matching apply_swap(const Matching& phi, int k, int j, const GainMatrix& g) {
  Matching out = phi;
  const int m = phi.assign.beam_of[static_cast<std::size_t>(k)];
  const int n = phi.assign.beam_of[static_cast<std::size_t>(j)];
  out.assign.beam_of[static_cast<std::size_t>(k)] = n;
  out.assign.beam_of[static_cast<std::size_t>(j)] = m;
  auto& om = out.assign.order[static_cast<std::size_t>(m)];
  auto& on = out.assign.order[static_cast<std::size_t>(n)];
  std::replace(om.begin(), om.end(), k, j);
  std::replace(on.begin(), on.end(), j, k);
  order_by_ascending_gain(out.assign, g);
  return out;
}

}  // namespace detail

/// True when exchanging the beams of k and j weakly improves all four
/// affected agents and strictly improves at least one.
inline bool is_swap_blocking(const Matching& phi, int k, int j, const GainMatrix& g, double p_tot,
                             double sigma2) {
  const int m = phi.assign.beam_of[static_cast<std::size_t>(k)];
  const int n = phi.assign.beam_of[static_cast<std::size_t>(j)];
  if (m < 0 || n < 0 || m == n) return false;
  const Matching swapped = detail::apply_swap(phi, k, j, g);
  const double pre[4] = {preference_value_user(k, m, phi, g, p_tot, sigma2),
                         preference_value_user(j, n, phi, g, p_tot, sigma2),
                         preference_value_beam(m, phi, g, p_tot, sigma2),
                         preference_value_beam(n, phi, g, p_tot, sigma2)};
  const double post[4] = {preference_value_user(k, n, swapped, g, p_tot, sigma2),
                          preference_value_user(j, m, swapped, g, p_tot, sigma2),
                          preference_value_beam(m, swapped, g, p_tot, sigma2),
                          preference_value_beam(n, swapped, g, p_tot, sigma2)};
  bool strict = false;
  for (int i = 0; i < 4; ++i) {
    if (post[i] < pre[i]) return false;
    if (post[i] > pre[i]) strict = true;
  }
  return strict;
}

/// Exchange-stable refinement: lexicographic scan over scheduled pairs,
/// execute any swap-blocking exchange, restart; capped at M^2 q_max^2 swaps.
inline SwapResult swap_phase(const Matching& init, const GainMatrix& g, double p_tot,
                             double sigma2) {
  SwapResult res;
  res.matching = init;
  const std::size_t num_users = init.num_users();
  const std::size_t num_beams = init.assign.num_beams();
  std::size_t q_max = 0;
  for (int q : init.assign.quotas) q_max = std::max(q_max, static_cast<std::size_t>(q));
  const std::size_t cap = num_beams * num_beams * q_max * q_max;

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k < num_users && !changed; ++k) {
      if (!res.matching.candidate[k]) continue;
      for (std::size_t j = k + 1; j < num_users && !changed; ++j) {
        if (!res.matching.candidate[j]) continue;
        const int ki = static_cast<int>(k);
        const int ji = static_cast<int>(j);
        if (!is_swap_blocking(res.matching, ki, ji, g, p_tot, sigma2)) continue;
        const int m = res.matching.assign.beam_of[k];
        const int n = res.matching.assign.beam_of[j];
        SwapRecord rec;
        rec.user_k = ki;
        rec.user_j = ji;
        rec.beam_m = m;
        rec.beam_n = n;
        rec.pre_user_k = preference_value_user(ki, m, res.matching, g, p_tot, sigma2);
        rec.pre_user_j = preference_value_user(ji, n, res.matching, g, p_tot, sigma2);
        rec.pre_beam_m = preference_value_beam(m, res.matching, g, p_tot, sigma2);
        rec.pre_beam_n = preference_value_beam(n, res.matching, g, p_tot, sigma2);
        res.matching = detail::apply_swap(res.matching, ki, ji, g);
        rec.post_user_k = preference_value_user(ki, n, res.matching, g, p_tot, sigma2);
        rec.post_user_j = preference_value_user(ji, m, res.matching, g, p_tot, sigma2);
        rec.post_beam_m = preference_value_beam(m, res.matching, g, p_tot, sigma2);
        rec.post_beam_n = preference_value_beam(n, res.matching, g, p_tot, sigma2);
        res.swaps.push_back(rec);
        changed = true;
        if (res.swaps.size() >= cap) {
          res.cap_hit = true;
          return res;
        }
      }
    }
  }
  return res;
}

struct ExhaustiveResult {
  Assignment assignment;
  BbReport report;
  bool feasible = false;
  long long candidates = 0;
};

/// Joint search: every (schedule, decoding order) candidate, Proposition-1
/// feasibility screen, branch-and-bound on survivors, argmax over sum rate.
/// Refuses instances with more than 1e5 candidates.
inline ExhaustiveResult exhaustive_schedule(const GainMatrix& g, const std::vector<int>& quotas,
                                            const std::vector<double>& r_min, double p_tot,
                                            double sigma2, double epsilon) {
  const std::size_t num_users = g.num_users;
  const std::size_t num_beams = g.num_beams;
  if (quotas.size() != num_beams) throw std::invalid_argument("exhaustive_schedule: quota size");

  // Candidate count: ordered fills beam by beam, each beam taking as many
  // users as its quota allows from those still unassigned.
  {
    double count = 1.0;
    std::size_t remaining = num_users;
    for (std::size_t m = 0; m < num_beams; ++m) {
      const std::size_t take = std::min(static_cast<std::size_t>(quotas[m]), remaining);
      for (std::size_t i = 0; i < take; ++i) count *= static_cast<double>(remaining - i);
      remaining -= take;
      if (count > 1e5) throw std::runtime_error("exhaustive_schedule: candidate count exceeds 1e5");
    }
  }

  ExhaustiveResult best;
  best.assignment = make_assignment(num_users, num_beams, quotas);
  double best_rate = -1.0;

  std::vector<char> used(num_users, 0);
  Assignment current = make_assignment(num_users, num_beams, quotas);

  std::function<void(std::size_t)> recurse = [&](std::size_t m) {
    if (m == num_beams) {
      ++best.candidates;
      if (!check_qos_feasible(g, current, r_min, p_tot, sigma2).member) return;
      BbReport rep = solve_bb(g, current, r_min, p_tot, sigma2, epsilon);
      if (rep.status == BbStatus::infeasible) return;
      const double rate = rep.sum_rate();
      if (rate > best_rate) {
        best_rate = rate;
        best.assignment = current;
        best.report = std::move(rep);
        best.feasible = true;
      }
      return;
    }
    std::size_t remaining = 0;
    for (char u : used) remaining += u == 0 ? 1 : 0;
    const std::size_t take = std::min(static_cast<std::size_t>(quotas[m]), remaining);
    std::function<void(std::size_t)> fill = [&](std::size_t slot) {
      if (slot == take) {
        recurse(m + 1);
        return;
      }
      for (std::size_t k = 0; k < num_users; ++k) {
        if (used[k]) continue;
        used[k] = 1;
        current.beam_of[k] = static_cast<int>(m);
        current.order[m].push_back(static_cast<int>(k));
        fill(slot + 1);
        current.order[m].pop_back();
        current.beam_of[k] = -1;
        used[k] = 0;
      }
    };
    fill(0);
  };
  recurse(0);
  return best;
}

/// Uniform random quota-respecting schedule; decoding order ascending gain.
inline Assignment random_schedule(const GainMatrix& g, const std::vector<int>& quotas,
                                  std::uint64_t seed) {
  const std::size_t num_users = g.num_users;
  const std::size_t num_beams = g.num_beams;
  Rng rng(seed);
  std::vector<int> perm(num_users);
  for (std::size_t k = 0; k < num_users; ++k) perm[k] = static_cast<int>(k);
  rng.shuffle(perm);

  Assignment a = make_assignment(num_users, num_beams, quotas);
  std::size_t idx = 0;
  for (std::size_t m = 0; m < num_beams; ++m) {
    for (std::size_t s = 0; s < static_cast<std::size_t>(quotas[m]) && idx < num_users; ++s, ++idx) {
      const int u = perm[idx];
      a.beam_of[static_cast<std::size_t>(u)] = static_cast<int>(m);
      a.order[m].push_back(u);
    }
  }
  order_by_ascending_gain(a, g);
  return a;
}

}  // namespace mmnoma
