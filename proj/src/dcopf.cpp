#include "gridstart/dcopf.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gridstart {

std::vector<double> pwl_slopes(const Generator& g, int segments) {
  if (segments < 1) throw std::invalid_argument("pwl_slopes: segments must be positive");
  std::vector<double> slopes(segments);
  double width = (g.p_max - g.p_min) / segments;
  for (int k = 0; k < segments; ++k) {
    double a = g.p_min + k * width;
    double b = a + width;
    slopes[k] = g.cost_c1 + g.cost_c2 * (a + b);
  }
  return slopes;
}

DcopfProblem build_dcopf(const NetworkCase& net, const LoadScenario& load) {
  const int nb = static_cast<int>(net.buses.size());
  const int ng = static_cast<int>(net.generators.size());
  const int slack = net.slack_index();

  DcopfProblem prob;
  LpProblem& lp = prob.lp;

  prob.theta_var.assign(nb, -1);
  for (int i = 0; i < nb; ++i) {
    if (i == slack) continue;
    prob.theta_var[i] = lp.add_var("th" + std::to_string(net.buses[i].id), -kInf, kInf, 0.0);
  }

  prob.gen_var.resize(ng);
  prob.seg_var.resize(ng);
  for (int g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    std::string base = "pg" + std::to_string(gen.bus);
    prob.gen_var[g] = lp.add_var(base, gen.p_min, gen.p_max, 0.0);
    int segments = gen.cost_c2 > 0.0 ? kDcopfSegments : 1;
    auto slopes = pwl_slopes(gen, segments);
    double width = (gen.p_max - gen.p_min) / segments;
    std::vector<std::pair<int, double>> link{{prob.gen_var[g], 1.0}};
    for (int k = 0; k < segments; ++k) {
      int sv = lp.add_var(base + "_s" + std::to_string(k), 0.0, width, slopes[k]);
      prob.seg_var[g].push_back(sv);
      link.emplace_back(sv, -1.0);
    }
    lp.add_row(RowSense::eq, gen.p_min, link, base + "_pwl");
    lp.objective_constant +=
        gen.cost_c0 + gen.cost_c1 * gen.p_min + gen.cost_c2 * gen.p_min * gen.p_min;
  }

  // One balance row per bus in per-unit; slack angle is fixed at zero by
  // omitting its variable.
  std::vector<std::vector<std::pair<int, double>>> rows(nb);
  for (const Branch& br : net.branches) {
    int f = net.bus_index(br.from_bus);
    int t = net.bus_index(br.to_bus);
    double bsus = 1.0 / br.x;
    if (prob.theta_var[f] >= 0) {
      rows[f].emplace_back(prob.theta_var[f], bsus);
      rows[t].emplace_back(prob.theta_var[f], -bsus);
    }
    if (prob.theta_var[t] >= 0) {
      rows[t].emplace_back(prob.theta_var[t], bsus);
      rows[f].emplace_back(prob.theta_var[t], -bsus);
    }
  }
  for (int g = 0; g < ng; ++g) {
    int bi = net.bus_index(net.generators[g].bus);
    rows[bi].emplace_back(prob.gen_var[g], 1.0 / net.base_mva);
  }
  for (int i = 0; i < nb; ++i) {
    double rhs = load.p_mw[i] / net.base_mva;
    lp.add_row(RowSense::eq, rhs, rows[i], "bal" + std::to_string(net.buses[i].id));
  }

  for (size_t k = 0; k < net.branches.size(); ++k) {
    const Branch& br = net.branches[k];
    if (br.rating_mva <= 0.0) continue;
    int f = net.bus_index(br.from_bus);
    int t = net.bus_index(br.to_bus);
    double bsus = 1.0 / br.x;
    std::vector<std::pair<int, double>> flow;
    if (prob.theta_var[f] >= 0) flow.emplace_back(prob.theta_var[f], bsus);
    if (prob.theta_var[t] >= 0) flow.emplace_back(prob.theta_var[t], -bsus);
    double cap = br.rating_mva / net.base_mva;
    std::string name = "lim" + std::to_string(br.from_bus) + "_" + std::to_string(br.to_bus);
    lp.add_row(RowSense::le, cap, flow, name + "_f");
    std::vector<std::pair<int, double>> neg;
    for (auto& [j, v] : flow) neg.emplace_back(j, -v);
    lp.add_row(RowSense::le, cap, neg, name + "_r");
  }

  return prob;
}

DcopfSolution solve_dcopf(const NetworkCase& net, const LoadScenario& load) {
  DcopfProblem prob = build_dcopf(net, load);
  LpSolution ls = solve_lp(prob.lp);

  DcopfSolution sol;
  if (ls.status != LpStatus::optimal) return sol;
  sol.feasible = true;
  sol.cost = ls.objective;

  const int nb = static_cast<int>(net.buses.size());
  sol.bus_angle_rad.assign(nb, 0.0);
  for (int i = 0; i < nb; ++i)
    if (prob.theta_var[i] >= 0) sol.bus_angle_rad[i] = ls.x(prob.theta_var[i]);

  sol.gen_p_mw.resize(net.generators.size());
  for (size_t g = 0; g < net.generators.size(); ++g) sol.gen_p_mw[g] = ls.x(prob.gen_var[g]);

  sol.flow_mw.resize(net.branches.size());
  for (size_t k = 0; k < net.branches.size(); ++k) {
    const Branch& br = net.branches[k];
    double th_f = sol.bus_angle_rad[net.bus_index(br.from_bus)];
    double th_t = sol.bus_angle_rad[net.bus_index(br.to_bus)];
    sol.flow_mw[k] = (th_f - th_t) / br.x * net.base_mva;
  }
  return sol;
}

DispatchSetpoint dcopf_setpoint(const NetworkCase& net, const DcopfSolution& sol) {
  if (!sol.feasible) throw std::invalid_argument("dcopf_setpoint: infeasible basepoint");
  DispatchSetpoint sp;
  sp.gen_p_mw = sol.gen_p_mw;
  sp.gen_v_pu.assign(net.generators.size(), 1.0);
  return sp;
}

}  // namespace gridstart
