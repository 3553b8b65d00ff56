#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "gridstart/dcopf.hpp"
#include "gridstart/network.hpp"
#include "gridstart/powerflow.hpp"
#include "gridstart/scenario.hpp"
#include "gridstart/slp.hpp"

using namespace gridstart;

namespace {

DispatchSetpoint even_setpoint(double pg2) {
  DispatchSetpoint sp;
  sp.gen_p_mw = {0.0, pg2};
  sp.gen_v_pu = {1.0, 1.0};
  return sp;
}

IvState pf_state(const NetworkCase& net, const LoadScenario& load, const DispatchSetpoint& sp) {
  PfOptions opt;
  PowerFlowSolution pf = solve_power_flow(net, sp, load, opt);
  REQUIRE(pf.converged);
  return state_from_power_flow(pf, net);
}

double total_violation(const NetworkCase& net, const IvState& st) {
  double sum, mx;
  state_violation(net, st, sum, mx);
  return mx;
}

}  // namespace

TEST_CASE("state_from_power_flow keeps the zero-load fixed point trivial") {
  const NetworkCase net = three_bus_case(Variant::non_congested);
  const LoadScenario load = bus3_scenario(net, 0.0, 0.0);
  const IvState st = pf_state(net, load, even_setpoint(0.0));
  for (int i = 0; i < 3; ++i) {
    CHECK(st.e(i) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(st.f(i)) < 1e-12);
    CHECK(std::abs(st.ir(i)) < 1e-12);
    CHECK(std::abs(st.ii(i)) < 1e-12);
  }
  for (double p : st.gen_p_mw) CHECK(std::abs(p) < 1e-9);
}

TEST_CASE("state_from_power_flow carries a consistent bilinear state") {
  const NetworkCase net = three_bus_case(Variant::non_congested);
  const LoadScenario load = bus3_scenario(net, 55.0, 300.0);
  const IvState st = pf_state(net, load, even_setpoint(30.0));

  Eigen::VectorXd p, q;
  bilinear_injections(st, p, q);
  // The injected power of a converged solution matches the schedule, so the
  // bilinear e*Ir+f*Ii identity holds at the power-flow tolerance.
  double sum, mx;
  state_mismatch(net, load, st, sum, mx);
  CHECK(mx < 1e-6);
  CHECK(p(2) == doctest::Approx(-0.55).epsilon(1e-7));
  CHECK(q(2) == doctest::Approx(-3.0).epsilon(1e-7));

  PfOptions stub;
  stub.max_iterations = 1;
  PowerFlowSolution bad = solve_power_flow(net, even_setpoint(30.0), load, stub);
  REQUIRE(!bad.converged);
  CHECK_THROWS_AS(state_from_power_flow(bad, net), std::invalid_argument);
}

TEST_CASE("flat_iv_start splits load in proportion to capacity") {
  const NetworkCase net = three_bus_case(Variant::congested);
  const LoadScenario load = bus3_scenario(net, 64.0, 210.0);
  const IvState st = flat_iv_start(net, load);
  for (int i = 0; i < 3; ++i) {
    CHECK(st.e(i) == doctest::Approx(1.0));
    CHECK(st.f(i) == doctest::Approx(0.0));
    // I = Y V vanishes at a uniform voltage profile with no shunts.
    CHECK(std::abs(st.ir(i)) < 1e-12);
    CHECK(std::abs(st.ii(i)) < 1e-12);
  }
  // Equal p_max gives an even split.
  CHECK(st.gen_p_mw[0] == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(st.gen_p_mw[1] == doctest::Approx(32.0).epsilon(1e-12));
  CHECK(st.gen_q_mvar[0] == 0.0);
  CHECK(st.gen_q_mvar[1] == 0.0);
}

TEST_CASE("oracle optimum is a fixed point of the linearization") {
  const NetworkCase net = three_bus_case(Variant::non_congested);
  const LoadScenario load = bus3_scenario(net, 55.0, 300.0);
  OracleOptions oopt;
  const OracleSolution oracle = acopf_oracle(net, load, oopt);
  REQUIRE(oracle.feasible);
  const IvState st = pf_state(net, load, oracle.setpoint);

  SlpLp s = linearize_iv(net, load, st, 1e-6);
  LpSolution ls = solve_lp(s.lp);
  REQUIRE(ls.status == LpStatus::optimal);
  double step = 0.0;
  for (int i = 0; i < 3; ++i) {
    step = std::max(step, std::abs(ls.x(s.de_p[i]) - ls.x(s.de_m[i])));
    step = std::max(step, std::abs(ls.x(s.df_p[i]) - ls.x(s.df_m[i])));
  }
  CHECK(step < 1e-6);
}

TEST_CASE("taylor rows reproduce the state at zero step") {
  const NetworkCase net = three_bus_case(Variant::non_congested);
  const LoadScenario load = bus3_scenario(net, 37.0, 120.0);
  const IvState st = pf_state(net, load, even_setpoint(18.0));
  // Zeroth-order terms: at a power-flow-consistent state the balance rows are
  // satisfied by the zero step up to the solver tolerance.
  double sum, mx;
  state_mismatch(net, load, st, sum, mx);
  CHECK(mx < 1e-8);
  Eigen::VectorXd p, q;
  bilinear_injections(st, p, q);
  for (int i = 0; i < 3; ++i) {
    CHECK(p(i) == doctest::Approx(st.e(i) * st.ir(i) + st.f(i) * st.ii(i)).epsilon(1e-12));
    CHECK(q(i) == doctest::Approx(st.f(i) * st.ir(i) - st.e(i) * st.ii(i)).epsilon(1e-12));
  }
}

TEST_CASE("octagon overshoot starts past the circumscribed radius") {
  const NetworkCase net = three_bus_case(Variant::congested);
  const double cap = 160.0 / net.base_mva;  // |V1| = 1 on the from side
  // V3 = V1 - z13*I with the current phase chosen to keep V3 inside its box.
  auto make_state = [&](double imag) {
    const std::complex<double> z13(0.002, 0.060);
    const std::complex<double> current = std::polar(imag, -std::arg(z13) + M_PI / 3.0);
    const std::complex<double> v3 = 1.0 - z13 * current;
    IvState st;
    st.e.resize(3);
    st.f.resize(3);
    st.e << 1.0, 1.0, v3.real();
    st.f << 0.0, 0.0, v3.imag();
    return st;
  };

  CHECK(total_violation(net, make_state(cap * (1.0 - 1e-9))) == 0.0);
  // A current of magnitude rating/cos(pi/8) sits on the octagon's outer
  // vertex radius and must overshoot at least one facet.
  const double vertex = cap / std::cos(M_PI / 8.0);
  CHECK(total_violation(net, make_state(vertex)) >=
        doctest::Approx(cap * (1.0 / std::cos(M_PI / 8.0) - 1.0)).epsilon(1e-9));
}

TEST_CASE("merit strictly decreases across accepted iterations") {
  for (Variant variant : {Variant::non_congested, Variant::congested}) {
    const NetworkCase net = three_bus_case(variant);
    const LoadScenario load = bus3_scenario(net, 55.0, 300.0);
    const SlpResult res = slp_solve(net, load, flat_iv_start(net, load));
    REQUIRE(res.trace.size() == static_cast<size_t>(res.iterations));
    double last = std::numeric_limits<double>::infinity();
    int accepted = 0;
    for (const SlpTraceRow& row : res.trace) {
      if (!row.accepted) continue;
      ++accepted;
      CHECK(row.merit < last);
      last = row.merit;
    }
    CHECK(accepted > 0);
  }
}

TEST_CASE("restart at a converged state re-converges immediately") {
  const NetworkCase net = three_bus_case(Variant::non_congested);
  const LoadScenario load = bus3_scenario(net, 55.0, 300.0);
  OracleOptions oopt;
  const OracleSolution oracle = acopf_oracle(net, load, oopt);
  REQUIRE(oracle.feasible);

  const SlpResult first = slp_solve(net, load, pf_state(net, load, oracle.setpoint));
  REQUIRE(first.converged);
  CHECK(first.iterations <= 2);
  CHECK(first.objective == doctest::Approx(oracle.objective).epsilon(1e-6));

  const SlpResult again = slp_solve(net, load, first.state);
  CHECK(again.converged);
  CHECK(again.iterations <= 2);
  CHECK(again.objective == doctest::Approx(first.objective).epsilon(1e-8));
}

TEST_CASE("converged states are feasible, not just balanced") {
  const NetworkCase net = three_bus_case(Variant::congested);
  OracleOptions oopt;
  for (double q3 : {80.0, 240.0}) {
    const LoadScenario load = bus3_scenario(net, 48.0, q3);
    const OracleSolution oracle = acopf_oracle(net, load, oopt);
    REQUIRE(oracle.feasible);
    const SlpResult res = slp_solve(net, load, pf_state(net, load, oracle.setpoint));
    REQUIRE(res.converged);

    double sum, mx;
    state_mismatch(net, load, res.state, sum, mx);
    CHECK(mx < 1e-6);
    CHECK(total_violation(net, res.state) < 1e-6);
    for (int i = 0; i < 3; ++i) {
      const double vm = std::hypot(res.state.e(i), res.state.f(i));
      CHECK(vm >= net.buses[i].v_min - 1e-6);
      CHECK(vm <= net.buses[i].v_max + 1e-6);
      const double v2 = vm * vm;
      CHECK(v2 > 0.25);
      CHECK(v2 < 2.25);
    }
  }
}

TEST_CASE("linearized power balance error is second order in the step") {
  const NetworkCase net = three_bus_case(Variant::non_congested);
  const AdmittanceMatrix y = build_ybus(net);
  SamplingSpec spec;
  spec.count = 20;
  spec.seed = 21;
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  for (const LoadScenario& load : sample_scenarios(net, spec)) {
    const IvState st = pf_state(net, load, even_setpoint(load.p_mw[2] / 2.0));
    Eigen::VectorXcd dv(3);
    for (int i = 0; i < 3; ++i) dv(i) = std::complex<double>(unit(rng), unit(rng));
    const Eigen::VectorXcd di = y.entries * dv;

    auto error_at = [&](double h) {
      double err = 0.0;
      for (int i = 0; i < 3; ++i) {
        const std::complex<double> v0(st.e(i), st.f(i));
        const std::complex<double> i0(st.ir(i), st.ii(i));
        const std::complex<double> s1 = (v0 + h * dv(i)) * std::conj(i0 + h * di(i));
        const std::complex<double> lin = v0 * std::conj(i0) +
                                         h * (v0 * std::conj(di(i)) + dv(i) * std::conj(i0));
        err = std::max(err, std::abs(s1 - lin));
      }
      return err;
    };

    const double e1 = error_at(1e-3);
    const double e2 = error_at(5e-4);
    REQUIRE(e2 > 0.0);
    const double factor = e1 / e2;
    CHECK(factor > 2.7);
    CHECK(factor < 6.0);
  }
}

TEST_CASE("warm starts never need more iterations than a flat start") {
  const NetworkCase net = three_bus_case(Variant::non_congested);
  const LoadScenario load = bus3_scenario(net, 55.0, 300.0);
  OracleOptions oopt;
  const OracleSolution oracle = acopf_oracle(net, load, oopt);
  REQUIRE(oracle.feasible);

  // Near-optimal start standing in for the ML+PF pipeline output.
  DispatchSetpoint near = oracle.setpoint;
  near.gen_p_mw[1] += 2.0;
  near.gen_v_pu[0] -= 0.003;
  near.gen_v_pu[1] -= 0.003;

  const SlpResult warm = slp_solve(net, load, pf_state(net, load, near));
  const SlpResult flat = slp_solve(net, load, flat_iv_start(net, load));
  CHECK(warm.converged);
  CHECK(warm.iterations <= flat.iterations);
  CHECK(warm.objective == doctest::Approx(oracle.objective).epsilon(5e-3));
}

TEST_CASE("slp objective dominates the lossless dcopf bound") {
  OracleOptions oopt;
  for (Variant variant : {Variant::non_congested, Variant::congested}) {
    const NetworkCase net = three_bus_case(variant);
    const LoadScenario load = bus3_scenario(net, 40.0, 200.0);
    const OracleSolution oracle = acopf_oracle(net, load, oopt);
    REQUIRE(oracle.feasible);
    const SlpResult res = slp_solve(net, load, pf_state(net, load, oracle.setpoint));
    REQUIRE(res.converged);
    const DcopfSolution dc = solve_dcopf(net, load);
    REQUIRE(dc.feasible);
    CHECK(res.objective >= dc.cost - 1e-6);
  }
}

TEST_CASE("iteration cap reports not-converged without throwing") {
  const NetworkCase net = three_bus_case(Variant::non_congested);
  const LoadScenario load = bus3_scenario(net, 70.0, 500.0);
  SlpOptions opt;
  opt.max_iterations = 5;
  const SlpResult res = slp_solve(net, load, flat_iv_start(net, load));
  const SlpResult capped = slp_solve(net, load, flat_iv_start(net, load), opt);
  CHECK(capped.iterations == 5);
  CHECK(!capped.converged);
  // The capped run is a prefix of the full run.
  REQUIRE(res.trace.size() >= 5);
  for (int k = 0; k < 5; ++k) {
    CHECK(capped.trace[k].merit == doctest::Approx(res.trace[k].merit).epsilon(1e-12));
    CHECK(capped.trace[k].accepted == res.trace[k].accepted);
  }
}

TEST_CASE("trace csv carries the documented columns") {
  const NetworkCase net = three_bus_case(Variant::non_congested);
  const LoadScenario load = bus3_scenario(net, 22.0, 90.0);
  const SlpResult res = slp_solve(net, load, flat_iv_start(net, load));
  const std::string csv = trace_to_csv(res.trace);
  CHECK(csv.rfind("iteration,radius,step_norm,objective,mismatch\n", 0) == 0);
  size_t lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == static_cast<size_t>(res.iterations) + 1);
}

TEST_CASE("slp options defaults match the documented plumbing") {
  const SlpOptions opt;
  CHECK(opt.step_tolerance == 1e-6);
  CHECK(opt.mismatch_tolerance == 1e-6);
  CHECK(opt.trust_radius_initial == 0.1);
  CHECK(opt.shrink == 0.5);
  CHECK(opt.expand == 1.5);
  CHECK(opt.max_iterations == 100);
  CHECK(opt.shrink > 0.0);
  CHECK(opt.shrink < 1.0);
  CHECK(opt.expand > 1.0);
}
