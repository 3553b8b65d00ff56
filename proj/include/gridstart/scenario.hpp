#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridstart/network.hpp"
#include "gridstart/powerflow.hpp"
#include "gridstart/regress.hpp"

namespace gridstart {

// Load sampling box for the bus-3 demand. Defaults cover every scenario in
// the benchmark tables with margin.
struct SamplingSpec {
  int count = 0;
  std::uint64_t seed = 0;
  double p_min_mw = 0.0, p_max_mw = 80.0;
  double q_min_mvar = 0.0, q_max_mvar = 610.0;
};

// i.i.d. uniform draws, deterministic under the seed. P is drawn before Q
// for each scenario, so streams are stable across counts.
std::vector<LoadScenario> sample_scenarios(const NetworkCase& c, const SamplingSpec& spec);

// Generator/bus roles in the two-generator benchmark; throws when the case
// does not have exactly one slack generator, one dispatchable generator and
// one load bus.
struct BenchLayout {
  int slack_gen = -1;
  int free_gen = -1;
  int load_bus = -1;  // bus index
};
BenchLayout bench_layout(const NetworkCase& c);

struct OracleOptions {
  double pg2_step_mw = 5.0;    // stage-1 grid pitch
  double v_step_pu = 0.005;
  double pg2_floor_mw = 0.01;  // stage-2 halving stops at this pitch
  double v_floor_pu = 1e-5;
  bool slp_check = true;       // stage-3 triangulation
};

struct OracleTrace {
  long grid_evaluated = 0;  // PF-evaluated stage-1 candidates
  long grid_feasible = 0;
  double grid_best_cost = 0.0;
  double refined_cost = 0.0;
  bool slp_ran = false;
  bool slp_converged = false;
  double slp_cost = 0.0;
  double slp_improvement_pct = 0.0;  // >0 when SLP beat the refined point
};

struct OracleSolution {
  bool feasible = false;
  DispatchSetpoint setpoint;  // minimal-violation candidate when infeasible
  double objective = 0.0;     // $/h; meaningful only when feasible
  PowerFlowSolution pf;       // at the returned setpoint
  double violation = 0.0;     // normalized constraint excess of the setpoint
  OracleTrace trace;
};

// Reference ACOPF: exhaustive (Pg2, V1, V2) grid, each candidate solved by AC
// power flow and feasibility-checked, then coordinate-descent refinement with
// step halving, then an SLP cross-check. Requires the two-generator layout.
OracleSolution acopf_oracle(const NetworkCase& c, const LoadScenario& load,
                            const OracleOptions& options = {});

struct DatasetBuild {
  Dataset dataset;      // feasible rows only, scenario order preserved
  int infeasible = 0;   // dropped scenarios
};

// Features (P3L, Q3L), targets (V1, V2, Pg1, Pg2) from the oracle optimum.
// Aborts when more than 20% of scenarios come back infeasible.
DatasetBuild build_dataset(const NetworkCase& c, const std::vector<LoadScenario>& scenarios,
                           const OracleOptions& options = {});

// CSV with header p3l_mw,q3l_mvar,v1_pu,v2_pu,pg1_mw,pg2_mw at full precision.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace gridstart
