#pragma once

#include <string>
#include <vector>

#include "gridstart/lp.hpp"
#include "gridstart/network.hpp"
#include "gridstart/powerflow.hpp"

namespace gridstart {

// Rectangular-coordinate operating point for the current-voltage ACOPF
// formulation: bus voltages e+jf, bus injection currents Ir+jIi, generator
// outputs in MW / MVAr.
struct IvState {
  Eigen::VectorXd e, f;
  Eigen::VectorXd ir, ii;
  std::vector<double> gen_p_mw;
  std::vector<double> gen_q_mvar;
};

struct SlpOptions {
  double step_tolerance = 1e-6;      // pu, infinity norm over voltage steps
  double mismatch_tolerance = 1e-6;  // pu
  double trust_radius_initial = 0.1;
  double shrink = 0.5;
  double expand = 1.5;
  int max_iterations = 100;
};

struct SlpTraceRow {
  int iteration = 0;
  double radius = 0.0;
  double step_norm = 0.0;
  double objective = 0.0;     // $/h at the state after this iteration
  double max_mismatch = 0.0;  // pu at the state after this iteration
  double merit = 0.0;
  bool accepted = false;
};

struct SlpResult {
  IvState state;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<SlpTraceRow> trace;
};

// LP over the step variables, plus the column maps needed to read a step
// back out of an LpSolution.  Plus/minus pairs split each signed step.
struct SlpLp {
  LpProblem lp;
  std::vector<int> de_p, de_m, df_p, df_m;  // per bus
  std::vector<int> dir, dii;                // per bus
  std::vector<int> dp_p, dp_m, dq_p, dq_m;  // per generator
};

IvState state_from_power_flow(const PowerFlowSolution& pf, const NetworkCase& net);

// e=1, f=0, currents from I=YV, load split across generators proportionally
// to p_max, zero reactive dispatch.
IvState flat_iv_start(const NetworkCase& net, const LoadScenario& load);

// Bus active/reactive injections e*Ir+f*Ii and f*Ir-e*Ii in pu.
void bilinear_injections(const IvState& st, Eigen::VectorXd& p_pu, Eigen::VectorXd& q_pu);

// Nodal power mismatch of the state against the scenario, in pu.
void state_mismatch(const NetworkCase& net, const LoadScenario& load, const IvState& st,
                    double& sum_out, double& max_out);

// Voltage-box and branch current-limit overshoot of the state, in pu. Zero for
// a state inside every bound; the merit and convergence checks fold this in so
// a converged state is feasible, not just power-balanced.
void state_violation(const NetworkCase& net, const IvState& st, double& sum_out, double& max_out);

double state_cost(const NetworkCase& net, const IvState& st);

SlpLp linearize_iv(const NetworkCase& net, const LoadScenario& load, const IvState& st,
                   double radius);

SlpResult slp_solve(const NetworkCase& net, const LoadScenario& load, const IvState& init,
                    const SlpOptions& options = {});

std::string trace_to_csv(const std::vector<SlpTraceRow>& trace);

}  // namespace gridstart
