#include "gridstart/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "gridstart/dcopf.hpp"
#include "gridstart/textio.hpp"

namespace gridstart {

namespace {

std::string fixed(double v, int width, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%*.*f", width, precision, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  std::string out = s;
  if (out.size() < width) out.append(width - out.size(), ' ');
  return out;
}

std::string param_summary(const ParamMap& params) {
  std::string out;
  for (const auto& [name, value] : params) {
    if (!out.empty()) out += ';';
    out += name + '=';
    if (std::abs(value - std::round(value)) < 1e-12 && std::abs(value) < 1e15) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(std::llround(value)));
      out += buf;
    } else {
      out += format_double(value);
    }
  }
  return out;
}

int target_index(const Dataset& data, const std::string& name) {
  for (int j = 0; j < data.targets(); ++j)
    if (data.target_names[j] == name) return j;
  throw std::runtime_error("run_accuracy: dataset has no target " + name);
}

double max_thermal(const PowerFlowSolution& pf, const NetworkCase& c) {
  double worst = 0.0;
  for (double v : thermal_violation(pf, c)) worst = std::max(worst, v);
  return worst;
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (!t.empty()) lines.push_back(t);
  }
  if (lines.empty()) throw std::runtime_error("csv: empty input");
  return lines;
}

}  // namespace

AccuracyTable run_accuracy(const Dataset& train, const Dataset& test,
                           const std::vector<std::string>& families, bool include_pg1,
                           std::uint64_t seed) {
  validate_dataset(train);
  validate_dataset(test);
  if (train.target_names != test.target_names || train.feature_names != test.feature_names)
    throw std::runtime_error("run_accuracy: train/test column mismatch");

  AccuracyTable table;
  table.targets = {"v1_pu", "v2_pu"};
  if (include_pg1) table.targets.push_back("pg1_mw");

  for (const std::string& family : families) {
    GridSearchSpec spec = default_grid(family, seed);
    GridSearchResult search = grid_search(spec, train);
    const ParamMap params = search.combos[search.best_index].params;
    std::unique_ptr<Model> model = fit_family(family, train, params);
    const Eigen::MatrixXd pred = model->predict_batch(test.x);

    AccuracyRow row;
    row.family = family;
    row.params = param_summary(params);
    for (const std::string& target : table.targets) {
      const int j = target_index(test, target);
      row.scores.push_back(r2_score(test.y.col(j), pred.col(j)));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

DispatchSetpoint ml_setpoint(const NetworkCase& c, const Model& model, double p3l_mw,
                             double q3l_mvar, double* intended_slack_mw) {
  const BenchLayout lay = bench_layout(c);
  Eigen::VectorXd x(2);
  x << p3l_mw, q3l_mvar;
  const Eigen::VectorXd y = model.predict(x);
  if (y.size() != 4) throw std::runtime_error("ml_setpoint: model must predict 4 targets");

  const Bus& bus1 = c.buses[c.bus_index(c.generators[lay.slack_gen].bus)];
  const Bus& bus2 = c.buses[c.bus_index(c.generators[lay.free_gen].bus)];
  const Generator& free_gen = c.generators[lay.free_gen];

  DispatchSetpoint sp;
  sp.gen_p_mw.assign(2, 0.0);
  sp.gen_v_pu.assign(2, 1.0);
  sp.gen_v_pu[lay.slack_gen] = std::clamp(y[0], bus1.v_min, bus1.v_max);
  sp.gen_v_pu[lay.free_gen] = std::clamp(y[1], bus2.v_min, bus2.v_max);
  sp.gen_p_mw[lay.free_gen] = std::clamp(y[3], free_gen.p_min, free_gen.p_max);
  if (intended_slack_mw) *intended_slack_mw = y[2];
  return sp;
}

CompareReport run_compare(const NetworkCase& c, const Model& model, int n_test,
                          std::uint64_t seed, const OracleOptions& oracle_options) {
  const BenchLayout lay = bench_layout(c);
  SamplingSpec sampling;
  sampling.count = n_test;
  sampling.seed = seed;
  const std::vector<LoadScenario> scenarios = sample_scenarios(c, sampling);

  CompareReport report;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const LoadScenario& sc = scenarios[i];
    const OracleSolution oracle = acopf_oracle(c, sc, oracle_options);
    // Scenarios outside the feasible envelope keep their minimal-violation
    // candidate as the reference dispatch; only a dead power flow loses the row.
    if (!oracle.pf.converged) {
      ++report.skipped;
      continue;
    }
    const double reference_cost =
        oracle.feasible ? oracle.objective : dispatch_cost(c, oracle.pf);

    double pg1_hat = 0.0;
    const DispatchSetpoint mlsp = ml_setpoint(c, model, sc.p_mw[lay.load_bus],
                                              sc.q_mvar[lay.load_bus], &pg1_hat);
    const PowerFlowSolution mlpf = solve_power_flow(c, mlsp, sc, {});

    const DcopfSolution dc = solve_dcopf(c, sc);
    if (!mlpf.converged || !dc.feasible) {
      ++report.skipped;
      continue;
    }
    const PowerFlowSolution dcpf = solve_power_flow(c, dcopf_setpoint(c, dc), sc, {});
    if (!dcpf.converged) {
      ++report.skipped;
      continue;
    }

    ComparisonRow row;
    row.scenario = static_cast<int>(i) + 1;
    row.p3l_mw = sc.p_mw[lay.load_bus];
    row.q3l_mvar = sc.q_mvar[lay.load_bus];
    row.oracle_cost = reference_cost;
    row.ml_cost = dispatch_cost(c, mlpf);
    row.ml_slack_change_mw = slack_change(mlpf, pg1_hat);
    row.ml_violation_mva = max_thermal(mlpf, c);
    row.dcopf_cost = dispatch_cost(c, dcpf);
    row.dcopf_slack_change_mw = slack_change(dcpf, dc.gen_p_mw[lay.slack_gen]);
    row.dcopf_violation_mva = max_thermal(dcpf, c);
    report.rows.push_back(row);
  }
  return report;
}

WarmStartReport run_warmstart(const NetworkCase& c, const Model& model, int n_test,
                              std::uint64_t seed, const SlpOptions& slp_options,
                              const OracleOptions& oracle_options) {
  const BenchLayout lay = bench_layout(c);
  SamplingSpec sampling;
  sampling.count = n_test;
  sampling.seed = seed;
  const std::vector<LoadScenario> scenarios = sample_scenarios(c, sampling);

  WarmStartReport report;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const LoadScenario& sc = scenarios[i];
    const OracleSolution oracle = acopf_oracle(c, sc, oracle_options);
    if (!oracle.feasible) {
      ++report.skipped;
      continue;
    }

    const DcopfSolution dc = solve_dcopf(c, sc);
    double pg1_hat = 0.0;
    const DispatchSetpoint mlsp = ml_setpoint(c, model, sc.p_mw[lay.load_bus],
                                              sc.q_mvar[lay.load_bus], &pg1_hat);
    const PowerFlowSolution mlpf = solve_power_flow(c, mlsp, sc, {});
    PowerFlowSolution dcpf;
    if (dc.feasible) dcpf = solve_power_flow(c, dcopf_setpoint(c, dc), sc, {});
    if (!dc.feasible || !dcpf.converged || !mlpf.converged) {
      ++report.skipped;
      continue;
    }

    WarmStartRow row;
    row.scenario = static_cast<int>(i) + 1;
    const auto run_from = [&](const IvState& init) {
      const SlpResult res = slp_solve(c, sc, init, slp_options);
      WarmStartCell cell;
      cell.iterations = res.iterations;
      cell.objective = res.objective;
      cell.converged = res.converged;
      return cell;
    };
    row.flat = run_from(flat_iv_start(c, sc));
    row.dcopf = run_from(state_from_power_flow(dcpf, c));
    row.ml = run_from(state_from_power_flow(mlpf, c));
    row.oracle = run_from(state_from_power_flow(oracle.pf, c));
    report.rows.push_back(row);
  }
  return report;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::runtime_error("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string accuracy_to_csv(const AccuracyTable& table) {
  std::string out = "family,params";
  for (const std::string& t : table.targets) out += ',' + t;
  out += '\n';
  for (const AccuracyRow& row : table.rows) {
    out += row.family + ',' + row.params;
    for (double s : row.scores) out += ',' + format_double(s);
    out += '\n';
  }
  return out;
}

AccuracyTable accuracy_from_csv(const std::string& text) {
  const std::vector<std::string> lines = csv_lines(text);
  const std::vector<std::string> header = split(lines[0], ',');
  if (header.size() < 3 || header[0] != "family" || header[1] != "params")
    throw std::runtime_error("accuracy csv: unexpected header");
  AccuracyTable table;
  table.targets.assign(header.begin() + 2, header.end());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> cells = split(lines[i], ',');
    if (cells.size() != header.size())
      throw std::runtime_error("accuracy csv: bad row: " + lines[i]);
    AccuracyRow row;
    row.family = cells[0];
    row.params = cells[1];
    for (std::size_t j = 2; j < cells.size(); ++j)
      row.scores.push_back(parse_double(cells[j], "accuracy score"));
    table.rows.push_back(std::move(row));
  }
  return table;
}

static const char* kComparisonHeader =
    "scenario,p3l_mw,q3l_mvar,oracle_cost,ml_cost,ml_slack_change_mw,ml_violation_mva,"
    "dcopf_cost,dcopf_slack_change_mw,dcopf_violation_mva";

std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = kComparisonHeader;
  out += '\n';
  for (const ComparisonRow& r : rows) {
    out += std::to_string(r.scenario);
    for (double v : {r.p3l_mw, r.q3l_mvar, r.oracle_cost, r.ml_cost, r.ml_slack_change_mw,
                     r.ml_violation_mva, r.dcopf_cost, r.dcopf_slack_change_mw,
                     r.dcopf_violation_mva})
      out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

std::vector<ComparisonRow> comparison_from_csv(const std::string& text) {
  const std::vector<std::string> lines = csv_lines(text);
  if (lines[0] != kComparisonHeader)
    throw std::runtime_error("comparison csv: unexpected header");
  std::vector<ComparisonRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> cells = split(lines[i], ',');
    if (cells.size() != 10) throw std::runtime_error("comparison csv: bad row: " + lines[i]);
    ComparisonRow r;
    r.scenario = parse_int(cells[0], "comparison scenario");
    r.p3l_mw = parse_double(cells[1], "comparison cell");
    r.q3l_mvar = parse_double(cells[2], "comparison cell");
    r.oracle_cost = parse_double(cells[3], "comparison cell");
    r.ml_cost = parse_double(cells[4], "comparison cell");
    r.ml_slack_change_mw = parse_double(cells[5], "comparison cell");
    r.ml_violation_mva = parse_double(cells[6], "comparison cell");
    r.dcopf_cost = parse_double(cells[7], "comparison cell");
    r.dcopf_slack_change_mw = parse_double(cells[8], "comparison cell");
    r.dcopf_violation_mva = parse_double(cells[9], "comparison cell");
    rows.push_back(r);
  }
  return rows;
}

static const char* kWarmStartHeader =
    "scenario,flat_iterations,flat_objective,flat_converged,"
    "dcopf_iterations,dcopf_objective,dcopf_converged,"
    "ml_iterations,ml_objective,ml_converged,"
    "oracle_iterations,oracle_objective,oracle_converged";

std::string warmstart_to_csv(const std::vector<WarmStartRow>& rows) {
  std::string out = kWarmStartHeader;
  out += '\n';
  for (const WarmStartRow& r : rows) {
    out += std::to_string(r.scenario);
    for (const WarmStartCell* cell : {&r.flat, &r.dcopf, &r.ml, &r.oracle}) {
      out += ',' + std::to_string(cell->iterations);
      out += ',' + format_double(cell->objective);
      out += ',' + std::string(cell->converged ? "1" : "0");
    }
    out += '\n';
  }
  return out;
}

std::vector<WarmStartRow> warmstart_from_csv(const std::string& text) {
  const std::vector<std::string> lines = csv_lines(text);
  if (lines[0] != kWarmStartHeader)
    throw std::runtime_error("warmstart csv: unexpected header");
  std::vector<WarmStartRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> cells = split(lines[i], ',');
    if (cells.size() != 13) throw std::runtime_error("warmstart csv: bad row: " + lines[i]);
    WarmStartRow r;
    r.scenario = parse_int(cells[0], "warmstart scenario");
    WarmStartCell* order[4] = {&r.flat, &r.dcopf, &r.ml, &r.oracle};
    for (int k = 0; k < 4; ++k) {
      order[k]->iterations = parse_int(cells[1 + 3 * k], "warmstart iterations");
      order[k]->objective = parse_double(cells[2 + 3 * k], "warmstart objective");
      const std::string& flag = cells[3 + 3 * k];
      if (flag != "0" && flag != "1")
        throw std::runtime_error("warmstart csv: bad converged flag: " + flag);
      order[k]->converged = flag == "1";
    }
    rows.push_back(r);
  }
  return rows;
}

std::string render_accuracy(const AccuracyTable& table) {
  std::ostringstream out;
  out << pad("family", 8) << pad("params", 36);
  for (const std::string& t : table.targets) {
    std::string cell = t;
    if (cell.size() < 10) cell.insert(0, 10 - cell.size(), ' ');
    out << cell;
  }
  out << '\n';
  for (const AccuracyRow& row : table.rows) {
    out << pad(row.family, 8) << pad(row.params, 36);
    for (double s : row.scores) out << fixed(s, 10, 4);
    out << '\n';
  }
  return out.str();
}

std::string render_comparison(const CompareReport& report) {
  std::ostringstream out;
  out << pad("scen", 6) << pad("p3l_mw", 9) << pad("q3l_mvar", 10) << pad("oracle", 10)
      << pad("ml_cost", 10) << pad("ml_dP", 9) << pad("ml_viol", 9) << pad("dc_cost", 10)
      << pad("dc_dP", 9) << pad("dc_viol", 9) << '\n';
  double sums[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
  for (const ComparisonRow& r : report.rows) {
    const double vals[9] = {r.p3l_mw,  r.q3l_mvar,           r.oracle_cost,
                            r.ml_cost, r.ml_slack_change_mw, r.ml_violation_mva,
                            r.dcopf_cost, r.dcopf_slack_change_mw, r.dcopf_violation_mva};
    out << pad(std::to_string(r.scenario), 6);
    const int widths[9] = {8, 9, 9, 9, 8, 8, 9, 8, 8};
    for (int j = 0; j < 9; ++j) {
      out << fixed(vals[j], widths[j], 3) << ' ';
      sums[j] += vals[j];
    }
    out << '\n';
  }
  if (!report.rows.empty()) {
    const double n = static_cast<double>(report.rows.size());
    out << pad("mean", 6);
    const int widths[9] = {8, 9, 9, 9, 8, 8, 9, 8, 8};
    for (int j = 0; j < 9; ++j) out << fixed(sums[j] / n, widths[j], 3) << ' ';
    out << '\n';
  }
  if (report.skipped > 0)
    out << "skipped " << report.skipped << " scenario(s) without a usable reference solution\n";
  return out.str();
}

std::string render_warmstart(const WarmStartReport& report) {
  std::ostringstream out;
  out << pad("scen", 6);
  for (const char* name : {"flat", "dcopf", "ml", "oracle"})
    out << pad(std::string(name) + "_it", 9) << pad(std::string(name) + "_obj", 12);
  out << '\n';
  for (const WarmStartRow& r : report.rows) {
    out << pad(std::to_string(r.scenario), 6);
    for (const WarmStartCell* cell : {&r.flat, &r.dcopf, &r.ml, &r.oracle}) {
      std::string it = std::to_string(cell->iterations);
      if (!cell->converged) it += "*";
      out << pad(it, 9) << fixed(cell->objective, 11, 3) << ' ';
    }
    out << '\n';
  }
  if (!report.rows.empty()) {
    std::vector<double> flat, dcopf, ml, oracle;
    for (const WarmStartRow& r : report.rows) {
      flat.push_back(r.flat.iterations);
      dcopf.push_back(r.dcopf.iterations);
      ml.push_back(r.ml.iterations);
      oracle.push_back(r.oracle.iterations);
    }
    out << "median iterations: flat " << median(flat) << ", dcopf " << median(dcopf) << ", ml "
        << median(ml) << ", oracle " << median(oracle) << '\n';
  }
  if (report.skipped > 0)
    out << "skipped " << report.skipped << " scenario(s) without a usable reference solution\n";
  return out.str();
}

}  // namespace gridstart
