#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "gridstart/network.hpp"

namespace gridstart {

struct LoadScenario {
  std::vector<double> p_mw;    // per bus, in case bus order
  std::vector<double> q_mvar;
};

// The study's single load point: demand at bus 3 only.
LoadScenario bus3_scenario(const NetworkCase& c, double p3l_mw, double q3l_mvar);

struct DispatchSetpoint {
  std::vector<double> gen_p_mw;  // per generator; slack generator's entry is
                                 // ignored (the slack absorbs the residual)
  std::vector<double> gen_v_pu;  // voltage magnitude at each generator's bus
};

struct PfOptions {
  double tolerance = 1e-8;  // pu mismatch
  int max_iterations = 20;
  bool flat_start = true;
  // When false, PV buses hold their voltage setpoint regardless of generator
  // reactive limits; callers that need the excess inspect gen_q_mvar.
  bool enforce_q_limits = true;
  // Used when flat_start is false: one complex voltage per bus.
  std::vector<std::complex<double>> initial_v;
};

struct BranchFlow {
  std::complex<double> from_mva;
  std::complex<double> to_mva;
};

struct PowerFlowSolution {
  std::vector<double> v_mag_pu;
  std::vector<double> v_ang_rad;
  std::vector<BranchFlow> flows;
  double slack_p_mw = 0.0;
  double slack_q_mvar = 0.0;
  std::vector<double> gen_p_mw;   // slack from PF, others from setpoint
  std::vector<double> gen_q_mvar;
  std::vector<bool> gen_q_limited;
  bool converged = false;
  int iterations = 0;
  double max_mismatch_pu = 0.0;
};

PowerFlowSolution solve_power_flow(const NetworkCase& c, const DispatchSetpoint& setpoint,
                                   const LoadScenario& scenario, const PfOptions& options);

// |solution.slack_P - intended|; rejects non-converged solutions.
double slack_change(const PowerFlowSolution& solution, double intended_slack_p_mw);

// Per branch: max(0, max(|S_from|, |S_to|) - rating_mva); 0 when unlimited.
std::vector<double> thermal_violation(const PowerFlowSolution& solution,
                                      const NetworkCase& c);

// Sum over generators of c0 + c1 P + c2 P^2 at the solution's dispatch.
double dispatch_cost(const NetworkCase& c, const PowerFlowSolution& solution);

// Mismatch system at fixed bus kinds, exposed for the Jacobian check.
// Unknowns x: angles at non-slack buses (bus order), then |V| at PQ buses.
// Rows: P residuals at non-slack buses, then Q residuals at PQ buses.
class PfSystem {
 public:
  PfSystem(const NetworkCase& c, const AdmittanceMatrix& ybus,
           std::vector<BusKind> kinds, Eigen::VectorXd p_sched_pu,
           Eigen::VectorXd q_sched_pu, Eigen::VectorXd v_sched_pu);

  int dim() const { return static_cast<int>(angle_vars_.size() + vmag_vars_.size()); }
  Eigen::VectorXd mismatch(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
  Eigen::VectorXd pack(const std::vector<std::complex<double>>& v) const;
  std::vector<std::complex<double>> unpack(const Eigen::VectorXd& x) const;
  // Complex bus injections V .* conj(Y V) at the state x, in pu.
  Eigen::VectorXcd injections(const Eigen::VectorXd& x) const;

 private:
  Eigen::VectorXcd voltages(const Eigen::VectorXd& x) const;
  const AdmittanceMatrix& y_;
  std::vector<BusKind> kinds_;
  Eigen::VectorXd p_sched_, q_sched_, v_sched_;
  std::vector<int> angle_vars_, vmag_vars_;  // bus indices per unknown
};

}  // namespace gridstart
