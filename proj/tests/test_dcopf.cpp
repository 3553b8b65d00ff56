#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "gridstart/dcopf.hpp"
#include "gridstart/network.hpp"
#include "gridstart/powerflow.hpp"
#include "gridstart/scenario.hpp"

using namespace gridstart;

namespace {

NetworkCase linear_cost_case(Variant variant) {
  NetworkCase c = three_bus_case(variant);
  c.generators[0].cost_c1 = 1.0;
  c.generators[0].cost_c2 = 0.0;
  c.generators[1].cost_c1 = 1.3;
  c.generators[1].cost_c2 = 0.0;
  return c;
}

}  // namespace

TEST_CASE("pwl slopes are the secants of the quadratic cost") {
  const NetworkCase c = three_bus_case(Variant::non_congested);
  const std::vector<double> s1 = pwl_slopes(c.generators[0], kDcopfSegments);
  REQUIRE(s1.size() == kDcopfSegments);
  // Segment width 60 MW: slope over [60k, 60k+60] is c1 + c2*(120k + 60).
  for (int k = 0; k < kDcopfSegments; ++k)
    CHECK(s1[k] == doctest::Approx(1.6 + 1.2 * k).epsilon(1e-12));
  // Convexity makes the envelope slopes strictly increasing.
  for (int k = 1; k < kDcopfSegments; ++k) CHECK(s1[k] > s1[k - 1]);

  Generator flat = c.generators[0];
  flat.cost_c2 = 0.0;
  for (double s : pwl_slopes(flat, kDcopfSegments))
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero load dispatches nothing") {
  const NetworkCase c = three_bus_case(Variant::non_congested);
  const DcopfSolution sol = solve_dcopf(c, bus3_scenario(c, 0.0, 0.0));
  REQUIRE(sol.feasible);
  CHECK(sol.gen_p_mw[0] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(sol.gen_p_mw[1] == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(sol.cost == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("reactive demand is invisible to the dc model") {
  const NetworkCase c = three_bus_case(Variant::non_congested);
  const DcopfSolution sol = solve_dcopf(c, bus3_scenario(c, 0.0, 500.0));
  REQUIRE(sol.feasible);
  CHECK(std::abs(sol.gen_p_mw[0]) < 1e-10);
  CHECK(std::abs(sol.gen_p_mw[1]) < 1e-10);
}

TEST_CASE("linear costs send the whole load to the cheaper generator") {
  const NetworkCase c = linear_cost_case(Variant::non_congested);
  const DcopfSolution sol = solve_dcopf(c, bus3_scenario(c, 100.0, 0.0));
  REQUIRE(sol.feasible);
  CHECK(sol.gen_p_mw[0] == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(sol.gen_p_mw[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(sol.cost == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("quadratic costs split the load along the merged segment ladder") {
  // Slopes merge as 1.6 (gen 1), 2.4 (gen 2), 2.8 (gen 1), ... so a 100 MW
  // load fills gen 1's first 60 MW segment and 40 MW of gen 2's first.
  const NetworkCase c = three_bus_case(Variant::non_congested);
  const DcopfSolution sol = solve_dcopf(c, bus3_scenario(c, 100.0, 0.0));
  REQUIRE(sol.feasible);
  CHECK(sol.gen_p_mw[0] == doctest::Approx(60.0).epsilon(1e-9));
  CHECK(sol.gen_p_mw[1] == doctest::Approx(40.0).epsilon(1e-9));
  CHECK(sol.cost == doctest::Approx(60.0 * 1.6 + 40.0 * 2.4).epsilon(1e-9));

  // A load inside the first segment stays entirely on gen 1.
  const DcopfSolution small = solve_dcopf(c, bus3_scenario(c, 30.0, 0.0));
  REQUIRE(small.feasible);
  CHECK(small.gen_p_mw[0] == doctest::Approx(30.0).epsilon(1e-9));
  CHECK(small.gen_p_mw[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(small.cost == doctest::Approx(48.0).epsilon(1e-9));
}

TEST_CASE("balance is lossless and flows follow the angles") {
  const NetworkCase c = three_bus_case(Variant::congested);
  for (double p3l : {15.0, 100.0, 333.0}) {
    const DcopfSolution sol = solve_dcopf(c, bus3_scenario(c, p3l, 50.0));
    REQUIRE(sol.feasible);
    CHECK(std::abs(sol.gen_p_mw[0] + sol.gen_p_mw[1] - p3l) < 1e-9);
    CHECK(sol.bus_angle_rad[0] == 0.0);
    for (size_t b = 0; b < c.branches.size(); ++b) {
      const Branch& br = c.branches[b];
      const int i = c.bus_index(br.from_bus);
      const int j = c.bus_index(br.to_bus);
      const double expected =
          (sol.bus_angle_rad[i] - sol.bus_angle_rad[j]) / br.x * c.base_mva;
      CHECK(sol.flow_mw[b] == doctest::Approx(expected).epsilon(1e-9));
    }
    // KVL around the 1-2-3-1 loop.
    const double kvl = sol.flow_mw[0] * c.branches[0].x +
                       sol.flow_mw[1] * c.branches[1].x -
                       sol.flow_mw[2] * c.branches[2].x;
    CHECK(std::abs(kvl) < 1e-9);
  }
}

TEST_CASE("the rating binds and shifts generation toward the load") {
  const NetworkCase open = three_bus_case(Variant::non_congested);
  const NetworkCase tight = three_bus_case(Variant::congested);
  const LoadScenario heavy = bus3_scenario(open, 580.0, 0.0);

  const DcopfSolution free_flow = solve_dcopf(open, heavy);
  REQUIRE(free_flow.feasible);
  REQUIRE(std::abs(free_flow.flow_mw[2]) > 160.0);

  const DcopfSolution capped = solve_dcopf(tight, heavy);
  REQUIRE(capped.feasible);
  CHECK(std::abs(capped.flow_mw[2]) <= 160.0 + 1e-9);
  CHECK(std::abs(capped.flow_mw[2]) == doctest::Approx(160.0).epsilon(1e-9));
  CHECK(capped.gen_p_mw[1] > free_flow.gen_p_mw[1] + 1.0);
  CHECK(capped.cost > free_flow.cost + 1e-6);
}

TEST_CASE("objective is monotone in the active load") {
  for (Variant variant : {Variant::non_congested, Variant::congested}) {
    const NetworkCase c = three_bus_case(variant);
    double previous = -1.0;
    for (int i = 0; i < 50; ++i) {
      const double p3l = 8.0 * i;
      const DcopfSolution sol = solve_dcopf(c, bus3_scenario(c, p3l, 200.0));
      REQUIRE(sol.feasible);
      CHECK(sol.cost >= previous - 1e-9);
      previous = sol.cost;
    }
  }
}

TEST_CASE("linear-cost dc objective lower-bounds the ac oracle") {
  const NetworkCase c = linear_cost_case(Variant::non_congested);
  for (double q3l : {40.0, 300.0}) {
    const LoadScenario load = bus3_scenario(c, 60.0, q3l);
    const DcopfSolution dc = solve_dcopf(c, load);
    const OracleSolution ac = acopf_oracle(c, load);
    REQUIRE(dc.feasible);
    REQUIRE(ac.feasible);
    CHECK(dc.cost <= ac.objective + 1e-9);
  }
}

TEST_CASE("capacity shortfall reports infeasible without throwing") {
  const NetworkCase c = three_bus_case(Variant::non_congested);
  const DcopfSolution sol = solve_dcopf(c, bus3_scenario(c, 2000.0, 0.0));
  CHECK_FALSE(sol.feasible);
}

TEST_CASE("warm-start setpoint carries the dispatch at flat voltage") {
  const NetworkCase c = three_bus_case(Variant::non_congested);
  const DcopfSolution sol = solve_dcopf(c, bus3_scenario(c, 100.0, 0.0));
  REQUIRE(sol.feasible);
  const DispatchSetpoint sp = dcopf_setpoint(c, sol);
  REQUIRE(sp.gen_p_mw.size() == 2);
  CHECK(sp.gen_p_mw[0] == sol.gen_p_mw[0]);
  CHECK(sp.gen_p_mw[1] == sol.gen_p_mw[1]);
  CHECK(sp.gen_v_pu == std::vector<double>{1.0, 1.0});
}

TEST_CASE("dc warm start always leaves a slack gap on loaded systems") {
  const NetworkCase c = three_bus_case(Variant::non_congested);
  for (double q3l : {20.0, 200.0, 480.0}) {
    const LoadScenario load = bus3_scenario(c, 45.0, q3l);
    const DcopfSolution dc = solve_dcopf(c, load);
    REQUIRE(dc.feasible);
    const PowerFlowSolution pf =
        solve_power_flow(c, dcopf_setpoint(c, dc), load, PfOptions{});
    REQUIRE(pf.converged);
    CHECK(slack_change(pf, dc.gen_p_mw[0]) > 0.0);
  }
}

TEST_CASE("the built lp exposes the variable layout") {
  const NetworkCase c = three_bus_case(Variant::congested);
  const DcopfProblem prob = build_dcopf(c, bus3_scenario(c, 120.0, 0.0));
  REQUIRE(prob.theta_var.size() == 3);
  CHECK(prob.theta_var[c.slack_index()] == -1);
  CHECK(prob.theta_var[1] >= 0);
  CHECK(prob.theta_var[2] >= 0);
  REQUIRE(prob.gen_var.size() == 2);
  REQUIRE(prob.seg_var.size() == 2);
  CHECK(prob.seg_var[0].size() == kDcopfSegments);

  const LpSolution lp = solve_lp(prob.lp);
  REQUIRE(lp.status == LpStatus::optimal);
  const DcopfSolution direct = solve_dcopf(c, bus3_scenario(c, 120.0, 0.0));
  CHECK(lp.objective == doctest::Approx(direct.cost).epsilon(1e-9));
}

TEST_CASE("dcopf is deterministic") {
  const NetworkCase c = three_bus_case(Variant::congested);
  const LoadScenario load = bus3_scenario(c, 77.7, 123.4);
  const DcopfSolution a = solve_dcopf(c, load);
  const DcopfSolution b = solve_dcopf(c, load);
  REQUIRE(a.feasible);
  CHECK(std::memcmp(a.gen_p_mw.data(), b.gen_p_mw.data(), 2 * sizeof(double)) == 0);
  CHECK(a.cost == b.cost);
  CHECK(a.flow_mw == b.flow_mw);
}
