#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "mmnoma/bb.hpp"
#include "mmnoma/rng.hpp"
#include "mmnoma/sca.hpp"

using namespace mmnoma;

namespace {

GainMatrix random_gains(std::size_t users, std::size_t beams, std::uint64_t seed, double lo = 0.1,
                        double hi = 2.0) {
  Rng rng(seed);
  GainMatrix g(users, beams);
  for (std::size_t k = 0; k < users; ++k) {
    for (std::size_t m = 0; m < beams; ++m) g(k, m) = rng.uniform(lo, hi);
  }
  return g;
}

}  // namespace

TEST_CASE("bound coefficients are tight at the anchor") {
  const BoundCoeffs bc = tighten_bound(1.0);
  REQUIRE_THAT(bc.mu, Catch::Matchers::WithinAbs(0.5, 1e-15));
  REQUIRE_THAT(bc.nu, Catch::Matchers::WithinAbs(std::numbers::ln2, 1e-15));
  REQUIRE_THAT(bc.mu * std::log(1.0) + bc.nu, Catch::Matchers::WithinAbs(std::log(2.0), 1e-15));
}

TEST_CASE("the logarithmic bound never exceeds the true curve") {
  const BoundCoeffs bc = tighten_bound(3.0);
  REQUIRE_THAT(bc.mu, Catch::Matchers::WithinAbs(0.75, 1e-15));
  REQUIRE_THAT(bc.nu, Catch::Matchers::WithinAbs(std::log(4.0) - 0.75 * std::log(3.0), 1e-15));
  for (int i = 1; i <= 1000; ++i) {
    const double tau = 0.01 * i;
    REQUIRE(bc.mu * std::log(tau) + bc.nu <= std::log1p(tau) + 1e-12);
  }
  // Tight exactly at the anchor.
  REQUIRE_THAT(bc.mu * std::log(3.0) + bc.nu, Catch::Matchers::WithinAbs(std::log(4.0), 1e-14));
}

TEST_CASE("the bound diverges to minus infinity at zero") {
  const BoundCoeffs bc = tighten_bound(0.7);
  REQUIRE(bc.mu * std::log(1e-12) + bc.nu < std::log1p(1e-12));
  REQUIRE(bc.mu * std::log(1e-300) + bc.nu < -100.0);
}

TEST_CASE("nonpositive anchors are rejected") {
  REQUIRE_THROWS_AS(tighten_bound(0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(tighten_bound(-1.0), std::invalid_argument);
}

TEST_CASE("single-beam order conditions degenerate to constants") {
  GainMatrix g(2, 1);
  g(0, 0) = 0.5;
  g(1, 0) = 2.0;
  const Assignment a = make_assignment(2, {{0, 1}});
  const std::vector<double> x_ref = {0.0, -1.0};
  const auto lins = linearize_order_constraint(x_ref, g, a, 1.0);
  REQUIRE(lins.size() == 1);
  for (double c : lins[0].lhs_coef) REQUIRE(c == 0.0);
  REQUIRE_THAT(lins[0].lhs_const, Catch::Matchers::WithinAbs(1.5, 1e-15));
  REQUIRE(lins[0].rhs_value == 0.0);
}

TEST_CASE("the linearization is exact at its anchor") {
  const GainMatrix g = random_gains(4, 2, 7);
  Assignment a = make_assignment(4, {{0, 1}, {2, 3}});
  order_by_ascending_gain(a, g);
  const std::vector<double> x_ref = {-1.0, -0.5, -2.0, 0.3};
  const auto lins = linearize_order_constraint(x_ref, g, a, 1.0);
  REQUIRE(lins.size() == 2);
  for (const OrderLinearization& lin : lins) {
    REQUIRE_THAT(lin.linear_rhs(x_ref), Catch::Matchers::WithinAbs(lin.convex_rhs(x_ref), 1e-10));
  }
}

TEST_CASE("the tangent plane minorizes the convex side everywhere") {
  const GainMatrix g = random_gains(4, 2, 8);
  Assignment a = make_assignment(4, {{0, 1}, {2, 3}});
  order_by_ascending_gain(a, g);
  const std::vector<double> x_ref = {-1.0, -1.0, -1.0, -1.0};
  const auto lins = linearize_order_constraint(x_ref, g, a, 1.0);
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(4);
    for (double& v : x) v = rng.uniform(-4.0, 1.5);
    for (const OrderLinearization& lin : lins) {
      REQUIRE(lin.convex_rhs(x) >= lin.linear_rhs(x) - 1e-10);
    }
  }
}

TEST_CASE("a lone user's subproblem pushes to the power budget") {
  GainMatrix g(1, 1);
  g(0, 0) = 1.0;
  const Assignment a = make_assignment(1, {{0}});
  ScaState state;
  state.x = {std::log(0.5)};
  const BoundCoeffs bc = tighten_bound(0.5);
  state.mu = {bc.mu};
  state.nu = {bc.nu};
  const std::vector<double> x_new = solve_subproblem(state, g, a, 3.0, 1.0, {0.0});
  REQUIRE_THAT(std::exp(x_new[0]), Catch::Matchers::WithinRel(3.0, 1e-4));
}

TEST_CASE("the subproblem never decreases its own objective") {
  const GainMatrix g = random_gains(4, 2, 31);
  Assignment a = make_assignment(4, {{0, 1}, {2, 3}});
  order_by_ascending_gain(a, g);
  const std::vector<double> r_min = uniform_qos(4, 0.02);
  const ScaReport rep = solve_sca(g, a, r_min, 3.0, 1.0, 1e-4);
  REQUIRE(rep.feasible);
  for (std::size_t i = 1; i < rep.objective_history.size(); ++i) {
    REQUIRE(rep.objective_history[i] >= rep.objective_history[i - 1] - 1e-9);
  }
}

TEST_CASE("a lone user converges to the full-budget rate quickly") {
  GainMatrix g(1, 1);
  g(0, 0) = 1.0;
  const Assignment a = make_assignment(1, {{0}});
  const ScaReport rep = solve_sca(g, a, {0.0}, 3.0, 1.0, 0.05);
  REQUIRE(rep.feasible);
  REQUIRE(rep.converged);
  REQUIRE(rep.iterations <= 3);
  REQUIRE_THAT(rep.sum_rate, Catch::Matchers::WithinAbs(2.0, 1e-3));
}

TEST_CASE("two-user result lands within five percent of the global search") {
  GainMatrix g(2, 1);
  g(0, 0) = 1.0;
  g(1, 0) = 4.0;
  const Assignment a = make_assignment(2, {{0, 1}});
  const std::vector<double> r_min = uniform_qos(2, 0.1);
  const BbReport bb = solve_bb(g, a, r_min, 2.0, 1.0, 0.01);
  const ScaReport sca = solve_sca(g, a, r_min, 2.0, 1.0, 0.05);
  REQUIRE(bb.status == BbStatus::converged);
  REQUIRE(sca.feasible);
  REQUIRE(sca.sum_rate >= 0.95 * bb.sum_rate());
  REQUIRE(sca.sum_rate <= bb.sum_rate() + 0.01 + 1e-6);
}

TEST_CASE("every accepted iterate is feasible for the original constraints") {
  Rng rng(606);
  int checked = 0;
  for (int trial = 0; trial < 30 && checked < 15; ++trial) {
    const GainMatrix g = random_gains(4, 2, rng.next_u64());
    Assignment a = make_assignment(4, {{0, 1}, {2, 3}});
    order_by_ascending_gain(a, g);
    const std::vector<double> r_min = uniform_qos(4, 0.05);
    const double p_tot = 3.0;
    const ScaReport rep = solve_sca(g, a, r_min, p_tot, 1.0, 0.05);
    if (!rep.feasible) continue;
    ++checked;
    REQUIRE(rep.power.nonnegative());
    REQUIRE(rep.power.total() <= p_tot * (1.0 + 1e-9));
    REQUIRE(sic_order_ok(g, a, rep.power, 1.0).ok);
    const RateVector rv = achievable_rates(g, a, rep.power, 1.0);
    REQUIRE(qos_ok(rv, a, r_min, 1e-6));
    REQUIRE_THAT(rv.sum_rate(), Catch::Matchers::WithinAbs(rep.sum_rate, 1e-9));
  }
  REQUIRE(checked >= 8);
}

TEST_CASE("objective history is nondecreasing on random instances") {
  Rng rng(707);
  int checked = 0;
  for (int trial = 0; trial < 100 && checked < 60; ++trial) {
    const GainMatrix g = random_gains(4, 2, rng.next_u64());
    Assignment a = make_assignment(4, {{0, 1}, {2, 3}});
    order_by_ascending_gain(a, g);
    const ScaReport rep = solve_sca(g, a, uniform_qos(4, 0.02), 3.0, 1.0, 0.05);
    if (!rep.feasible) continue;
    ++checked;
    for (std::size_t i = 1; i < rep.objective_history.size(); ++i) {
      REQUIRE(rep.objective_history[i] >= rep.objective_history[i - 1] - 1e-9);
    }
  }
  REQUIRE(checked >= 30);
}

TEST_CASE("infeasible schedules are reported without power") {
  GainMatrix g(2, 1);
  g(0, 0) = 0.01;
  g(1, 0) = 0.02;
  const Assignment a = make_assignment(2, {{0, 1}});
  const ScaReport rep = solve_sca(g, a, uniform_qos(2, 5.0), 0.5, 1.0, 0.05);
  REQUIRE_FALSE(rep.feasible);
  REQUIRE(rep.sum_rate == 0.0);
}

TEST_CASE("the final rate never exceeds the exhaustive power search by its tolerance") {
  Rng rng(808);
  int checked = 0;
  for (int trial = 0; trial < 20 && checked < 8; ++trial) {
    const GainMatrix g = random_gains(4, 2, rng.next_u64());
    Assignment a = make_assignment(4, {{0, 1}, {2, 3}});
    order_by_ascending_gain(a, g);
    const std::vector<double> r_min = uniform_qos(4, 0.02);
    const BbReport bb = solve_bb(g, a, r_min, 3.0, 1.0, 0.1);
    if (bb.status != BbStatus::converged || bb.sum_rate() <= 0.0) continue;
    const ScaReport sca = solve_sca(g, a, r_min, 3.0, 1.0, 0.05);
    if (!sca.feasible) continue;
    ++checked;
    REQUIRE(sca.sum_rate <= bb.sum_rate() + 0.1 + 1e-6);
  }
  REQUIRE(checked >= 4);
}
