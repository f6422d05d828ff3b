#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mmnoma/bb.hpp"
#include "mmnoma/rng.hpp"
#include "mmnoma/sca.hpp"
#include "mmnoma/matching.hpp"

using namespace mmnoma;

namespace {

// Independent sum-rate evaluation over the two-user single-beam simplex.
// Returns the best grid value subject to SINR floors; order conditions are
// automatic for a single beam in ascending-gain order.
double grid_optimum_two_user(double g1, double g2, double p_tot, double sigma2, double gamma_min,
                             int steps) {
  double best = -1.0;
  for (int i = 0; i <= steps; ++i) {
    const double b1 = p_tot * i / steps;
    for (int j = 0; j <= steps - i; ++j) {
      const double b2 = p_tot * j / steps;
      const double s1 = g1 * b1 / (g1 * b2 + sigma2);
      const double s2 = g2 * b2 / sigma2;
      if (s1 < gamma_min || s2 < gamma_min) continue;
      best = std::max(best, std::log2(1.0 + s1) + std::log2(1.0 + s2));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("objective is zero at the origin") {
  SinrTarget t;
  t.gamma = {0.0, 0.0};
  REQUIRE(bb_objective(t) == 0.0);
}

TEST_CASE("objective adds per-user log terms") {
  SinrTarget t;
  t.gamma = {1.0, 3.0};
  REQUIRE_THAT(bb_objective(t), Catch::Matchers::WithinAbs(-3.0, 1e-12));
}

TEST_CASE("objective matches an independent evaluation") {
  Rng rng(15);
  SinrTarget t;
  double want = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double v = rng.uniform(0.0, 9.0);
    t.gamma.push_back(v);
    want -= std::log2(1.0 + v);
  }
  REQUIRE_THAT(bb_objective(t), Catch::Matchers::WithinAbs(want, 1e-12));
}

TEST_CASE("bisection halves a one-dimensional box") {
  SinrBox box;
  box.lower.gamma = {0.0};
  box.upper.gamma = {2.0};
  const auto [left, right] = bisect(box);
  REQUIRE(left.lower[0] == 0.0);
  REQUIRE(left.upper[0] == 1.0);
  REQUIRE(right.lower[0] == 1.0);
  REQUIRE(right.upper[0] == 2.0);
}

TEST_CASE("bisection splits the longest edge") {
  SinrBox box;
  box.lower.gamma = {0.0, 0.0};
  box.upper.gamma = {4.0, 1.0};
  const auto [left, right] = bisect(box);
  REQUIRE(left.upper[0] == 2.0);
  REQUIRE(left.upper[1] == 1.0);
  REQUIRE(right.lower[0] == 2.0);
}

TEST_CASE("edge-length ties split the lowest dimension") {
  SinrBox box;
  box.lower.gamma = {0.0, 0.0};
  box.upper.gamma = {2.0, 2.0};
  const auto [left, right] = bisect(box);
  REQUIRE(left.upper[0] == 1.0);
  REQUIRE(left.upper[1] == 2.0);
}

TEST_CASE("nodes with unreachable lower corners carry sentinel bounds") {
  GainMatrix g(1, 1);
  g(0, 0) = 1.0;
  const Assignment a = make_assignment(1, {{0}});
  SinrBox box;
  box.lower.gamma = {100.0};  // needs more power than the budget
  box.upper.gamma = {200.0};
  const BbNode node = bound_node(box, g, a, 1.0, 1.0);
  REQUIRE(node.lower_bound == 0.0);
  REQUIRE(node.upper_bound == 0.0);
  REQUIRE_FALSE(node.feasible_point.has_value());
}

TEST_CASE("degenerate feasible boxes have equal bounds") {
  GainMatrix g(1, 1);
  g(0, 0) = 1.0;
  const Assignment a = make_assignment(1, {{0}});
  SinrBox box;
  box.lower.gamma = {0.5};
  box.upper.gamma = {0.5};
  const BbNode node = bound_node(box, g, a, 1.0, 1.0);
  REQUIRE(node.feasible_point.has_value());
  REQUIRE_THAT(node.lower_bound, Catch::Matchers::WithinAbs(node.upper_bound, 1e-12));
  REQUIRE_THAT(node.upper_bound, Catch::Matchers::WithinAbs(-std::log2(1.5), 1e-12));
}

TEST_CASE("box bounds sandwich the true optimum inside the box") {
  const double g1 = 1.0, g2 = 4.0, p_tot = 2.0, sigma2 = 1.0;
  GainMatrix g(2, 1);
  g(0, 0) = g1;
  g(1, 0) = g2;
  const Assignment a = make_assignment(2, {{0, 1}});
  SinrBox box;
  box.lower.gamma = {0.1, 0.1};
  box.upper.gamma = {1.0, 4.0};
  const BbNode node = bound_node(box, g, a, p_tot, sigma2);
  REQUIRE(node.feasible_point.has_value());

  // Grid over the box interior, keeping only targets achievable in budget.
  double best = 1e18;
  const int steps = 200;
  for (int i = 0; i <= steps; ++i) {
    const double t1 = box.lower[0] + (box.upper[0] - box.lower[0]) * i / steps;
    for (int j = 0; j <= steps; ++j) {
      const double t2 = box.lower[1] + (box.upper[1] - box.lower[1]) * j / steps;
      // Minimal powers for these targets (triangular system).
      const double b2 = t2 * sigma2 / g2;
      const double b1 = t1 * (g1 * b2 + sigma2) / g1;
      if (b1 + b2 > p_tot) continue;
      SinrTarget t;
      t.gamma = {t1, t2};
      best = std::min(best, bb_objective(t));
    }
  }
  REQUIRE(node.lower_bound <= best + 1e-9);
  REQUIRE(node.upper_bound >= best - 1e-9);
}

TEST_CASE("a lone user gets the whole budget") {
  GainMatrix g(1, 1);
  g(0, 0) = 1.0;
  const Assignment a = make_assignment(1, {{0}});
  const BbReport rep = solve_bb(g, a, {0.0}, 3.0, 1.0, 0.1);
  REQUIRE(rep.status == BbStatus::converged);
  REQUIRE(rep.sum_rate() >= 2.0 - 0.1);
  REQUIRE(rep.sum_rate() <= 2.0 + 1e-9);
}

TEST_CASE("two-user optimum matches the frozen grid value") {
  // Externally computed 2001-step simplex grid optimum for this instance.
  const double frozen_grid_opt = 3.134970998159488;
  GainMatrix g(2, 1);
  g(0, 0) = 1.0;
  g(1, 0) = 4.0;
  const Assignment a = make_assignment(2, {{0, 1}});
  const BbReport rep = solve_bb(g, a, uniform_qos(2, 0.1), 2.0, 1.0, 0.1);
  REQUIRE(rep.status == BbStatus::converged);
  REQUIRE(rep.sum_rate() >= frozen_grid_opt - 0.1 - 1e-2);
  REQUIRE(rep.sum_rate() <= frozen_grid_opt + 1e-2);

  const double in_test = grid_optimum_two_user(1.0, 4.0, 2.0, 1.0, std::exp2(0.1) - 1.0, 1000);
  REQUIRE_THAT(in_test, Catch::Matchers::WithinAbs(frozen_grid_opt, 5e-3));
}

TEST_CASE("gap history is monotone and closes under the tolerance") {
  Rng rng(2222);
  for (int trial = 0; trial < 10; ++trial) {
    GainMatrix g(4, 2);
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t m = 0; m < 2; ++m) g(k, m) = rng.uniform(0.1, 2.0);
    }
    Assignment a = make_assignment(4, {{0, 1}, {2, 3}});
    order_by_ascending_gain(a, g);
    const BbReport rep = solve_bb(g, a, uniform_qos(4, 0.05), 3.0, 1.0, 0.1);
    if (rep.status == BbStatus::infeasible) continue;
    REQUIRE(rep.status == BbStatus::converged);
    for (std::size_t i = 1; i < rep.gap_history.size(); ++i) {
      REQUIRE(rep.gap_history[i].upper <= rep.gap_history[i - 1].upper + 1e-12);
      REQUIRE(rep.gap_history[i].lower >= rep.gap_history[i - 1].lower - 1e-12);
    }
    const BbGapEntry& last = rep.gap_history.back();
    REQUIRE(last.upper - last.lower <= 0.1 + 1e-9);
  }
}

TEST_CASE("infeasible schedules are reported") {
  GainMatrix g(2, 1);
  g(0, 0) = 0.01;
  g(1, 0) = 0.02;
  const Assignment a = make_assignment(2, {{0, 1}});
  const BbReport rep = solve_bb(g, a, uniform_qos(2, 5.0), 0.5, 1.0, 0.1);
  REQUIRE(rep.status == BbStatus::infeasible);
}

TEST_CASE("the returned power vector reproduces the reported value") {
  Rng rng(3333);
  int checked = 0;
  for (int trial = 0; trial < 20 && checked < 8; ++trial) {
    GainMatrix g(4, 2);
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t m = 0; m < 2; ++m) g(k, m) = rng.uniform(0.1, 2.0);
    }
    Assignment a = make_assignment(4, {{0, 1}, {2, 3}});
    order_by_ascending_gain(a, g);
    const std::vector<double> r_min = uniform_qos(4, 0.05);
    const BbReport rep = solve_bb(g, a, r_min, 3.0, 1.0, 0.1);
    if (rep.status != BbStatus::converged || !rep.best_power.nonnegative()) continue;
    if (rep.sum_rate() <= 0.0) continue;
    ++checked;
    const RateVector rv = achievable_rates(g, a, rep.best_power, 1.0);
    REQUIRE_THAT(rv.sum_rate(), Catch::Matchers::WithinAbs(rep.sum_rate(), 1e-6));
    REQUIRE(sic_order_ok(g, a, rep.best_power, 1.0).ok);
    REQUIRE(qos_ok(rv, a, r_min, 1e-7));
    REQUIRE(rep.best_power.total() <= 3.0 * (1.0 + 1e-9));
  }
  REQUIRE(checked >= 4);
}

TEST_CASE("search dominates the surrogate and fixed-power values") {
  Rng rng(4444);
  int checked = 0;
  for (int trial = 0; trial < 20 && checked < 6; ++trial) {
    GainMatrix g(4, 2);
    for (std::size_t k = 0; k < 4; ++k) {
      for (std::size_t m = 0; m < 2; ++m) g(k, m) = rng.uniform(0.1, 2.0);
    }
    Assignment a = make_assignment(4, {{0, 1}, {2, 3}});
    order_by_ascending_gain(a, g);
    const std::vector<double> r_min = uniform_qos(4, 0.02);
    const double p_tot = 4.0;
    const BbReport bb = solve_bb(g, a, r_min, p_tot, 1.0, 0.1);
    if (bb.status != BbStatus::converged || bb.sum_rate() <= 0.0) continue;
    const ScaReport sca = solve_sca(g, a, r_min, p_tot, 1.0, 0.05);
    if (!sca.feasible) continue;
    ++checked;
    // The search tolerance allows the surrogate method to exceed it by eps.
    REQUIRE(bb.sum_rate() >= sca.sum_rate - 0.1 - 1e-6);

    const PowerAllocation fixed = fixed_power_allocation(a, p_tot);
    if (sic_order_ok(g, a, fixed, 1.0).ok && qos_ok(achievable_rates(g, a, fixed, 1.0), a, r_min)) {
      REQUIRE(bb.sum_rate() >= achievable_rates(g, a, fixed, 1.0).sum_rate() - 0.1 - 1e-6);
    }
  }
  REQUIRE(checked >= 3);
}

TEST_CASE("iteration cap is honored") {
  GainMatrix g(4, 2);
  Rng rng(5555);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t m = 0; m < 2; ++m) g(k, m) = rng.uniform(0.5, 2.0);
  }
  Assignment a = make_assignment(4, {{0, 1}, {2, 3}});
  order_by_ascending_gain(a, g);
  BbOptions opts;
  opts.max_nodes = 3;
  const BbReport rep = solve_bb(g, a, uniform_qos(4, 0.02), 5.0, 1.0, 1e-6, opts);
  REQUIRE(rep.iterations <= 3);
  if (rep.status == BbStatus::iteration_cap) REQUIRE(rep.iterations == 3);
}
