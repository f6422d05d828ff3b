#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

#include "mmnoma/assignment.hpp"
#include "mmnoma/feasibility.hpp"
#include "mmnoma/rates.hpp"

namespace mmnoma {

// Axis-aligned rectangle of per-user SINR bounds, the branch-and-bound
// search region.
struct SinrBox {
  SinrTarget lower;
  SinrTarget upper;

  std::size_t dims() const { return lower.size(); }

  double longest_edge(std::size_t* dim_out = nullptr) const {
    double best = -1.0;
    std::size_t best_dim = 0;
    for (std::size_t i = 0; i < dims(); ++i) {
      const double len = upper[i] - lower[i];
      if (len > best) {
        best = len;
        best_dim = i;
      }
    }
    if (dim_out) *dim_out = best_dim;
    return best;
  }
};

// One search node. The bounds follow the extended-objective convention:
// both are 0 when the box's lower corner is not achievable (the node then
// cannot improve on any feasible value, since the objective is negative on
// feasible points). feasible_point holds the minimal power vector achieving
// the lower corner when it is achievable.
struct BbNode {
  SinrBox box;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  std::optional<PowerAllocation> feasible_point;
};

enum class BbStatus { converged, infeasible, iteration_cap };

struct BbGapEntry {
  int iteration;
  double upper;  // U(t), negated-objective domain
  double lower;  // L(t)
  std::size_t open_nodes;
};

struct BbReport {
  double best_value = 0.0;  // U*, negated objective; |best_value| is the sum rate
  PowerAllocation best_power;
  std::vector<BbGapEntry> gap_history;
  int iterations = 0;
  BbStatus status = BbStatus::infeasible;

  double sum_rate() const { return -best_value; }
};

/// The BB objective: U(Gamma) = -sum_j log2(1 + Gamma_j).
inline double bb_objective(const SinrTarget& t) {
  double acc = 0.0;
  for (double gm : t.gamma) acc -= std::log2(1.0 + gm);
  return acc;
}

/// Bisects at the midpoint of a longest edge; ties go to the lowest
/// dimension index.
inline std::pair<SinrBox, SinrBox> bisect(const SinrBox& box) {
  std::size_t dim = 0;
  box.longest_edge(&dim);
  const double mid = 0.5 * (box.lower[dim] + box.upper[dim]);
  SinrBox left = box;
  SinrBox right = box;
  left.upper[dim] = mid;
  right.lower[dim] = mid;
  return {left, right};
}

/// Evaluates both bound functions on a box via the lower-corner membership
/// test.
inline BbNode bound_node(const SinrBox& box, const GainMatrix& g, const Assignment& a,
                         double p_tot, double sigma2) {
  BbNode node;
  node.box = box;
  const FeasVerdict verdict = check_membership(g, a, box.lower, p_tot, sigma2);
  if (!verdict.member) return node;  // both bounds stay at the 0 sentinel
  node.lower_bound = bb_objective(box.upper);
  node.upper_bound = bb_objective(box.lower);
  node.feasible_point = verdict.min_power;
  return node;
}

struct BbOptions {
  int max_nodes = 100000;
  double prune_slack = 1e-12;
};

/// epsilon-optimal power allocation for a fixed schedule and decoding order
/// by branch-and-bound over the SINR box.
inline BbReport solve_bb(const GainMatrix& g, const Assignment& a, const std::vector<double>& r_min,
                         double p_tot, double sigma2, double epsilon, BbOptions opts = {}) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  BbReport report;
  report.best_power = PowerAllocation(a.num_users());

  const std::vector<int> users = a.stacked_users();
  const std::size_t n = users.size();
  if (n == 0) {
    report.status = BbStatus::converged;
    return report;
  }

  SinrBox root;
  root.lower = qos_floors(a, r_min);
  root.upper.gamma.resize(n);
  {
    std::size_t s = 0;
    for (std::size_t m = 0; m < a.num_beams(); ++m) {
      for (int u : a.order[m]) {
        const double cap = g(static_cast<std::size_t>(u), m) * p_tot / sigma2;
        if (cap < root.lower[s]) {
          report.status = BbStatus::infeasible;
          return report;
        }
        root.upper.gamma[s++] = cap;
      }
    }
  }

  struct OpenNode {
    SinrBox box;
    double lb;  // lower-bound value; lower corner known achievable
    long long seq;

    bool operator>(const OpenNode& o) const {
      if (lb != o.lb) return lb > o.lb;
      return seq > o.seq;  // FIFO on ties
    }
  };
  std::priority_queue<OpenNode, std::vector<OpenNode>, std::greater<OpenNode>> open;
  long long seq = 0;

  double incumbent_rate = -kInf;
  auto consider_corner = [&](const BbNode& node) {
    if (!node.feasible_point) return;
    const RateVector rates = achievable_rates(g, a, *node.feasible_point, sigma2);
    const double rate = rates.sum_rate();
    if (rate > incumbent_rate) {
      incumbent_rate = rate;
      report.best_power = *node.feasible_point;
    }
  };

  const BbNode root_node = bound_node(root, g, a, p_tot, sigma2);
  if (!root_node.feasible_point) {
    report.status = BbStatus::infeasible;
    return report;
  }
  consider_corner(root_node);
  open.push({root, root_node.lower_bound, seq++});

  // Bounds are tracked in the minimization domain (feasible values <= 0).
  // U is the best certified feasible value; L is the heap minimum, which
  // never decreases because children inherit at least their parent's bound.
  double upper_track = -incumbent_rate;
  double lower_track = root_node.lower_bound;
  report.gap_history.push_back({0, upper_track, lower_track, open.size()});

  int iter = 0;
  while (!open.empty() && upper_track - open.top().lb > epsilon) {
    if (iter >= opts.max_nodes) {
      report.status = BbStatus::iteration_cap;
      report.iterations = iter;
      report.best_value = -incumbent_rate;
      return report;
    }
    ++iter;

    const OpenNode current = open.top();
    open.pop();
    lower_track = current.lb;

    auto [left, right] = bisect(current.box);
    for (const SinrBox& child : {left, right}) {
      const BbNode node = bound_node(child, g, a, p_tot, sigma2);
      if (!node.feasible_point) continue;  // sentinel bounds: nothing better inside
      consider_corner(node);
      if (node.lower_bound < upper_track - opts.prune_slack) {
        open.push({child, node.lower_bound, seq++});
      }
    }
    upper_track = std::min(upper_track, -incumbent_rate);
    report.gap_history.push_back({iter, upper_track, lower_track, open.size()});
  }

  if (open.empty()) {
    lower_track = upper_track;
  } else {
    lower_track = std::max(lower_track, open.top().lb);
  }
  if (!report.gap_history.empty()) {
    report.gap_history.push_back({iter, upper_track, lower_track, open.size()});
  }
  report.iterations = iter;
  report.best_value = -incumbent_rate;
  report.status = BbStatus::converged;
  return report;
}

}  // namespace mmnoma
