#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridstart/regress.hpp"
#include "gridstart/scenario.hpp"
#include "gridstart/slp.hpp"

namespace gridstart {

// One estimator family's held-out scores, aligned with the table's target
// list. params is the tuned hyperparameter summary, ';'-separated.
struct AccuracyRow {
  std::string family;
  std::string params;
  std::vector<double> scores;  // 100 * R^2 per displayed target
};

struct AccuracyTable {
  std::vector<std::string> targets;
  std::vector<AccuracyRow> rows;
};

// One fresh scenario: reference cost against the two dispatch pipelines.
struct ComparisonRow {
  int scenario = 0;  // 1-based index in the sampled stream
  double p3l_mw = 0.0, q3l_mvar = 0.0;
  double oracle_cost = 0.0;
  double ml_cost = 0.0, ml_slack_change_mw = 0.0, ml_violation_mva = 0.0;
  double dcopf_cost = 0.0, dcopf_slack_change_mw = 0.0, dcopf_violation_mva = 0.0;
};

struct WarmStartCell {
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
};

// SLP effort per initialization on one scenario.
struct WarmStartRow {
  int scenario = 0;
  WarmStartCell flat, dcopf, ml, oracle;
};

struct CompareReport {
  std::vector<ComparisonRow> rows;
  int skipped = 0;  // scenarios dropped (infeasible oracle or failed pipeline PF)
};

struct WarmStartReport {
  std::vector<WarmStartRow> rows;
  int skipped = 0;
};

// Tune each family on train via its default grid, then score on test.
// include_pg1 adds the slack dispatch column (congested-variant table).
AccuracyTable run_accuracy(const Dataset& train, const Dataset& test,
                           const std::vector<std::string>& families, bool include_pg1,
                           std::uint64_t seed);

// Predicted setpoint for one load point, device limits clamped. Returns the
// setpoint plus the model's intended slack dispatch (for slack-change).
DispatchSetpoint ml_setpoint(const NetworkCase& c, const Model& model, double p3l_mw,
                             double q3l_mvar, double* intended_slack_mw);

CompareReport run_compare(const NetworkCase& c, const Model& model, int n_test,
                          std::uint64_t seed, const OracleOptions& oracle_options = {});

WarmStartReport run_warmstart(const NetworkCase& c, const Model& model, int n_test,
                              std::uint64_t seed, const SlpOptions& slp_options = {},
                              const OracleOptions& oracle_options = {});

// Lower median of absolute iteration counts is the warm-start headline.
double median(std::vector<double> values);

// CSV forms parse back losslessly; text forms are aligned for the terminal.
std::string accuracy_to_csv(const AccuracyTable& table);
AccuracyTable accuracy_from_csv(const std::string& text);
std::string comparison_to_csv(const std::vector<ComparisonRow>& rows);
std::vector<ComparisonRow> comparison_from_csv(const std::string& text);
std::string warmstart_to_csv(const std::vector<WarmStartRow>& rows);
std::vector<WarmStartRow> warmstart_from_csv(const std::string& text);

std::string render_accuracy(const AccuracyTable& table);
std::string render_comparison(const CompareReport& report);
std::string render_warmstart(const WarmStartReport& report);

}  // namespace gridstart
