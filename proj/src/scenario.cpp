#include "gridstart/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gridstart/parallel.hpp"
#include "gridstart/rng.hpp"
#include "gridstart/slp.hpp"
#include "gridstart/textio.hpp"

namespace gridstart {

namespace {

constexpr double kFeasTol = 1e-7;     // pu, per normalized constraint excess
constexpr double kHugeViolation = 1e9;

// Normalized constraint excess of a PF solution: voltage band (pu), generator
// boxes (pu on system base), branch loading (pu). Non-converged flows get a
// sentinel so they always lose to any converged candidate.
double candidate_violation(const NetworkCase& c, const PowerFlowSolution& pf) {
  if (!pf.converged) return kHugeViolation;
  const double base = c.base_mva;
  double viol = 0.0;
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    viol += std::max(0.0, c.buses[i].v_min - pf.v_mag_pu[i]);
    viol += std::max(0.0, pf.v_mag_pu[i] - c.buses[i].v_max);
  }
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    const Generator& gen = c.generators[g];
    viol += std::max(0.0, gen.p_min - pf.gen_p_mw[g]) / base;
    viol += std::max(0.0, pf.gen_p_mw[g] - gen.p_max) / base;
    viol += std::max(0.0, gen.q_min - pf.gen_q_mvar[g]) / base;
    viol += std::max(0.0, pf.gen_q_mvar[g] - gen.q_max) / base;
  }
  const std::vector<double> thermal = thermal_violation(pf, c);
  for (double t : thermal) viol += t / base;
  return viol;
}

struct CandidateEval {
  PowerFlowSolution pf;
  double cost = std::numeric_limits<double>::infinity();
  double violation = kHugeViolation;
  bool feasible = false;
};

struct OracleContext {
  const NetworkCase* c = nullptr;
  LoadScenario load;
  int slack_gen = -1;  // generator at the slack bus
  int free_gen = -1;   // the dispatchable generator
};

CandidateEval evaluate_candidate(const OracleContext& ctx, double v1, double v2,
                                 double pg2, const std::vector<std::complex<double>>& warm) {
  const NetworkCase& c = *ctx.c;
  DispatchSetpoint sp;
  sp.gen_p_mw.assign(c.generators.size(), 0.0);
  sp.gen_v_pu.assign(c.generators.size(), 1.0);
  sp.gen_p_mw[ctx.free_gen] = pg2;
  sp.gen_v_pu[ctx.slack_gen] = v1;
  sp.gen_v_pu[ctx.free_gen] = v2;

  PfOptions opt;
  opt.enforce_q_limits = false;
  if (!warm.empty()) {
    opt.flat_start = false;
    opt.initial_v = warm;
  }
  CandidateEval eval;
  eval.pf = solve_power_flow(c, sp, ctx.load, opt);
  if (!eval.pf.converged && !warm.empty()) {
    opt.flat_start = true;
    opt.initial_v.clear();
    eval.pf = solve_power_flow(c, sp, ctx.load, opt);
  }
  eval.violation = candidate_violation(c, eval.pf);
  eval.feasible = eval.violation <= kFeasTol;
  if (eval.pf.converged) eval.cost = dispatch_cost(c, eval.pf);
  return eval;
}

std::vector<double> make_grid(double lo, double hi, double step) {
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = lo + i * step;
  return grid;
}

struct UnitResult {
  bool has_best = false;
  double best_cost = std::numeric_limits<double>::infinity();
  double best_v1 = 0.0, best_v2 = 0.0, best_pg2 = 0.0;
  CandidateEval best;
  double min_violation = std::numeric_limits<double>::infinity();
  double viol_v1 = 0.0, viol_v2 = 0.0, viol_pg2 = 0.0;
  CandidateEval viol;
  long evaluated = 0;
  long feasible = 0;
};

}  // namespace

std::vector<LoadScenario> sample_scenarios(const NetworkCase& c, const SamplingSpec& spec) {
  if (spec.count < 1) throw std::runtime_error("sample_scenarios: count must be >= 1");
  if (spec.p_max_mw < spec.p_min_mw || spec.q_max_mvar < spec.q_min_mvar)
    throw std::runtime_error("sample_scenarios: empty sampling box");
  Rng rng(spec.seed);
  std::vector<LoadScenario> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    const double p = rng.uniform(spec.p_min_mw, spec.p_max_mw);
    const double q = rng.uniform(spec.q_min_mvar, spec.q_max_mvar);
    out.push_back(bus3_scenario(c, p, q));
  }
  return out;
}

BenchLayout bench_layout(const NetworkCase& c) {
  if (c.generators.size() != 2)
    throw std::runtime_error("bench_layout: expects the two-generator benchmark");
  BenchLayout lay;
  const int slack_bus = c.slack_index();
  for (int g = 0; g < 2; ++g) {
    if (c.bus_index(c.generators[g].bus) == slack_bus)
      lay.slack_gen = g;
    else
      lay.free_gen = g;
  }
  if (lay.slack_gen < 0 || lay.free_gen < 0)
    throw std::runtime_error("bench_layout: need one slack and one dispatchable generator");
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    if (c.generator_at(c.buses[i].id) < 0) {
      if (lay.load_bus >= 0) throw std::runtime_error("bench_layout: expected a single load bus");
      lay.load_bus = static_cast<int>(i);
    }
  }
  if (lay.load_bus < 0) throw std::runtime_error("bench_layout: no load bus");
  return lay;
}

OracleSolution acopf_oracle(const NetworkCase& c, const LoadScenario& load,
                            const OracleOptions& options) {
  const BenchLayout lay = bench_layout(c);
  OracleContext ctx;
  ctx.c = &c;
  ctx.load = load;
  ctx.slack_gen = lay.slack_gen;
  ctx.free_gen = lay.free_gen;

  const Generator& slack = c.generators[ctx.slack_gen];
  const Generator& free_gen = c.generators[ctx.free_gen];
  const Bus& bus1 = c.buses[c.bus_index(slack.bus)];
  const Bus& bus2 = c.buses[c.bus_index(free_gen.bus)];

  const std::vector<double> v1s = make_grid(bus1.v_min, bus1.v_max, options.v_step_pu);
  const std::vector<double> v2s = make_grid(bus2.v_min, bus2.v_max, options.v_step_pu);
  const std::vector<double> pg2s = make_grid(free_gen.p_min, free_gen.p_max, options.pg2_step_mw);
  const int nv1 = static_cast<int>(v1s.size());
  const int nv2 = static_cast<int>(v2s.size());
  const int units = nv1 * nv2;

  // Stage 1: exhaustive grid. One worker unit per (V1, V2) pair; the Pg2 line
  // is scanned in ascending order with warm-started power flows and cut off
  // once the slack generator falls irrecoverably below its floor.
  std::vector<UnitResult> results(units);
  parallel_for(units, [&](int u) {
    const double v1 = v1s[u / nv2];
    const double v2 = v2s[u % nv2];
    UnitResult& r = results[u];
    std::vector<std::complex<double>> warm;
    for (double pg2 : pg2s) {
      CandidateEval eval = evaluate_candidate(ctx, v1, v2, pg2, warm);
      ++r.evaluated;
      if (eval.pf.converged) {
        warm.assign(eval.pf.v_mag_pu.size(), 0.0);
        for (std::size_t i = 0; i < warm.size(); ++i)
          warm[i] = std::polar(eval.pf.v_mag_pu[i], eval.pf.v_ang_rad[i]);
      } else {
        warm.clear();
      }
      if (eval.feasible) {
        ++r.feasible;
        if (eval.cost < r.best_cost) {
          r.has_best = true;
          r.best_cost = eval.cost;
          r.best_v1 = v1;
          r.best_v2 = v2;
          r.best_pg2 = pg2;
          r.best = eval;
        }
      }
      if (eval.violation < r.min_violation) {
        r.min_violation = eval.violation;
        r.viol_v1 = v1;
        r.viol_v2 = v2;
        r.viol_pg2 = pg2;
        r.viol = eval;
      }
      // Raising Pg2 further only pushes the slack deeper below its floor.
      if (eval.pf.converged &&
          eval.pf.gen_p_mw[ctx.slack_gen] < slack.p_min - 2.0 * options.pg2_step_mw)
        break;
    }
  });

  OracleSolution sol;
  sol.setpoint.gen_p_mw.assign(2, 0.0);
  sol.setpoint.gen_v_pu.assign(2, 1.0);

  int best_unit = -1;
  int viol_unit = -1;
  double viol_min = std::numeric_limits<double>::infinity();
  double best_cost = std::numeric_limits<double>::infinity();
  for (int u = 0; u < units; ++u) {
    sol.trace.grid_evaluated += results[u].evaluated;
    sol.trace.grid_feasible += results[u].feasible;
    if (results[u].has_best && results[u].best_cost < best_cost) {
      best_cost = results[u].best_cost;
      best_unit = u;
    }
    if (results[u].min_violation < viol_min) {
      viol_min = results[u].min_violation;
      viol_unit = u;
    }
  }

  if (best_unit < 0) {
    const UnitResult& r = results[viol_unit];
    sol.feasible = false;
    sol.setpoint.gen_p_mw[ctx.free_gen] = r.viol_pg2;
    sol.setpoint.gen_v_pu[ctx.slack_gen] = r.viol_v1;
    sol.setpoint.gen_v_pu[ctx.free_gen] = r.viol_v2;
    sol.pf = r.viol.pf;
    if (sol.pf.converged) sol.setpoint.gen_p_mw[ctx.slack_gen] = sol.pf.gen_p_mw[ctx.slack_gen];
    sol.violation = r.min_violation;
    sol.objective = std::numeric_limits<double>::quiet_NaN();
    return sol;
  }

  sol.trace.grid_best_cost = best_cost;

  // Stage 2: local descent from the grid incumbent. First-improvement over
  // signed unit moves (axes, then diagonals) with step halving down to the
  // floor pitches.
  double cur_v1 = results[best_unit].best_v1;
  double cur_v2 = results[best_unit].best_v2;
  double cur_pg2 = results[best_unit].best_pg2;
  CandidateEval cur = results[best_unit].best;

  std::vector<std::array<int, 3>> moves;
  for (int axis = 0; axis < 3; ++axis)
    for (int s : {+1, -1}) {
      std::array<int, 3> m{0, 0, 0};
      m[axis] = s;
      moves.push_back(m);
    }
  for (int d0 = -1; d0 <= 1; ++d0)
    for (int d1 = -1; d1 <= 1; ++d1)
      for (int d2 = -1; d2 <= 1; ++d2) {
        const int nz = (d0 != 0) + (d1 != 0) + (d2 != 0);
        if (nz >= 2) moves.push_back({d0, d1, d2});
      }

  double step_pg2 = options.pg2_step_mw / 2.0;
  double step_v = options.v_step_pu / 2.0;
  std::vector<std::complex<double>> warm;
  auto rewarm = [&]() {
    warm.assign(cur.pf.v_mag_pu.size(), 0.0);
    for (std::size_t i = 0; i < warm.size(); ++i)
      warm[i] = std::polar(cur.pf.v_mag_pu[i], cur.pf.v_ang_rad[i]);
  };
  rewarm();
  while (true) {
    bool improved = false;
    for (const auto& m : moves) {
      const double pg2 = std::clamp(cur_pg2 + m[0] * step_pg2, free_gen.p_min, free_gen.p_max);
      const double v1 = std::clamp(cur_v1 + m[1] * step_v, bus1.v_min, bus1.v_max);
      const double v2 = std::clamp(cur_v2 + m[2] * step_v, bus2.v_min, bus2.v_max);
      if (pg2 == cur_pg2 && v1 == cur_v1 && v2 == cur_v2) continue;
      CandidateEval eval = evaluate_candidate(ctx, v1, v2, pg2, warm);
      if (eval.feasible && eval.cost < cur.cost - 1e-12) {
        cur_pg2 = pg2;
        cur_v1 = v1;
        cur_v2 = v2;
        cur = eval;
        rewarm();
        improved = true;
        break;
      }
    }
    if (improved) continue;
    if (step_pg2 <= options.pg2_floor_mw * (1.0 + 1e-9) &&
        step_v <= options.v_floor_pu * (1.0 + 1e-9))
      break;
    step_pg2 = std::max(step_pg2 / 2.0, options.pg2_floor_mw);
    step_v = std::max(step_v / 2.0, options.v_floor_pu);
  }

  sol.feasible = true;
  sol.setpoint.gen_p_mw[ctx.free_gen] = cur_pg2;
  sol.setpoint.gen_p_mw[ctx.slack_gen] = cur.pf.gen_p_mw[ctx.slack_gen];
  sol.setpoint.gen_v_pu[ctx.slack_gen] = cur_v1;
  sol.setpoint.gen_v_pu[ctx.free_gen] = cur_v2;
  sol.pf = cur.pf;
  sol.objective = cur.cost;
  sol.violation = 0.0;
  sol.trace.refined_cost = cur.cost;

  // Stage 3: SLP triangulation. A healthy oracle is a fixed point up to the
  // solver tolerances; a material improvement here flags a bad grid pitch.
  if (options.slp_check) {
    sol.trace.slp_ran = true;
    try {
      IvState st = state_from_power_flow(cur.pf, c);
      SlpResult slp = slp_solve(c, load, st);
      sol.trace.slp_converged = slp.converged;
      if (slp.converged) {
        sol.trace.slp_cost = slp.objective;
        const double denom = std::max(std::abs(sol.objective), 1e-9);
        sol.trace.slp_improvement_pct = 100.0 * (sol.objective - slp.objective) / denom;
      }
    } catch (const std::exception&) {
      sol.trace.slp_converged = false;
    }
  }
  return sol;
}

DatasetBuild build_dataset(const NetworkCase& c, const std::vector<LoadScenario>& scenarios,
                           const OracleOptions& options) {
  if (scenarios.empty()) throw std::runtime_error("build_dataset: no scenarios");
  const BenchLayout lay = bench_layout(c);
  const int load_bus = lay.load_bus;
  const int slack_gen = lay.slack_gen;
  const int free_gen = lay.free_gen;

  const int n = static_cast<int>(scenarios.size());
  std::vector<OracleSolution> sols(n);
  parallel_for(n, [&](int i) { sols[i] = acopf_oracle(c, scenarios[i], options); });

  DatasetBuild out;
  for (const OracleSolution& s : sols)
    if (!s.feasible) ++out.infeasible;
  if (5 * out.infeasible > n) {
    std::ostringstream msg;
    msg << "build_dataset: " << out.infeasible << " of " << n
        << " scenarios infeasible (>20%); sampling ranges likely exceed the feasible region";
    throw std::runtime_error(msg.str());
  }

  const int kept = n - out.infeasible;
  out.dataset.x.resize(kept, 2);
  out.dataset.y.resize(kept, 4);
  out.dataset.feature_names = {"p3l_mw", "q3l_mvar"};
  out.dataset.target_names = {"v1_pu", "v2_pu", "pg1_mw", "pg2_mw"};
  int r = 0;
  for (int i = 0; i < n; ++i) {
    if (!sols[i].feasible) continue;
    out.dataset.x(r, 0) = scenarios[i].p_mw[load_bus];
    out.dataset.x(r, 1) = scenarios[i].q_mvar[load_bus];
    out.dataset.y(r, 0) = sols[i].setpoint.gen_v_pu[slack_gen];
    out.dataset.y(r, 1) = sols[i].setpoint.gen_v_pu[free_gen];
    out.dataset.y(r, 2) = sols[i].pf.gen_p_mw[slack_gen];
    out.dataset.y(r, 3) = sols[i].setpoint.gen_p_mw[free_gen];
    ++r;
  }
  return out;
}

std::string dataset_to_csv(const Dataset& data) {
  validate_dataset(data);
  std::string text;
  for (int j = 0; j < data.features(); ++j) {
    if (j) text += ',';
    text += data.feature_names[j];
  }
  for (int j = 0; j < data.targets(); ++j) {
    text += ',';
    text += data.target_names[j];
  }
  text += '\n';
  for (int i = 0; i < data.rows(); ++i) {
    for (int j = 0; j < data.features(); ++j) {
      if (j) text += ',';
      text += format_double(data.x(i, j));
    }
    for (int j = 0; j < data.targets(); ++j) {
      text += ',';
      text += format_double(data.y(i, j));
    }
    text += '\n';
  }
  return text;
}

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: empty file");
  const std::vector<std::string> header = split(trim(line), ',');
  const std::vector<std::string> expected = {"p3l_mw", "q3l_mvar", "v1_pu",
                                             "v2_pu",  "pg1_mw",   "pg2_mw"};
  if (header != expected) throw std::runtime_error("dataset: unexpected header: " + line);

  std::vector<std::array<double, 6>> rows;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::vector<std::string> cells = split(t, ',');
    if (cells.size() != 6) throw std::runtime_error("dataset: bad row: " + line);
    std::array<double, 6> row;
    for (int j = 0; j < 6; ++j) row[j] = parse_double(cells[j], "dataset cell");
    rows.push_back(row);
  }
  Dataset data;
  data.feature_names = {expected[0], expected[1]};
  data.target_names = {expected[2], expected[3], expected[4], expected[5]};
  data.x.resize(rows.size(), 2);
  data.y.resize(rows.size(), 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.x(i, 0) = rows[i][0];
    data.x(i, 1) = rows[i][1];
    for (int j = 0; j < 4; ++j) data.y(i, j) = rows[i][2 + j];
  }
  validate_dataset(data);
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  out << dataset_to_csv(data);
  if (!out) throw std::runtime_error("save_dataset: write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return dataset_from_csv(buf.str());
}

}  // namespace gridstart
