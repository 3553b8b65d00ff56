#pragma once

#include <vector>

#include "gridstart/lp.hpp"
#include "gridstart/network.hpp"
#include "gridstart/powerflow.hpp"

namespace gridstart {

// B-theta DCOPF: lossless, reactance-only network, quadratic generator costs
// replaced by their piecewise-linear secant envelope.
struct DcopfProblem {
  LpProblem lp;
  std::vector<int> theta_var;            // per bus, -1 at the slack
  std::vector<int> gen_var;              // per generator
  std::vector<std::vector<int>> seg_var; // per generator, its segment variables
};

struct DcopfSolution {
  bool feasible = false;
  std::vector<double> gen_p_mw;
  std::vector<double> bus_angle_rad;
  std::vector<double> flow_mw;  // per branch, from-to direction
  double cost = 0.0;
};

constexpr int kDcopfSegments = 10;

// Secant slopes of c0 + c1 p + c2 p^2 over equal segments of [p_min, p_max].
std::vector<double> pwl_slopes(const Generator& g, int segments);

DcopfProblem build_dcopf(const NetworkCase& net, const LoadScenario& load);

DcopfSolution solve_dcopf(const NetworkCase& net, const LoadScenario& load);

// Warm-start setpoint from a DCOPF basepoint: dispatch at the DCOPF split
// with flat 1.0 pu voltage targets at generator buses.
DispatchSetpoint dcopf_setpoint(const NetworkCase& net, const DcopfSolution& sol);

}  // namespace gridstart
