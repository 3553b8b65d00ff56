#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

namespace gridstart {

enum class RowSense { le, eq, ge };
enum class LpStatus { optimal, infeasible, unbounded };

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LpProblem {
  Eigen::VectorXd c;
  double objective_constant = 0.0;
  Eigen::MatrixXd a;
  std::vector<RowSense> senses;
  Eigen::VectorXd b;
  Eigen::VectorXd lower, upper;
  std::vector<std::string> var_names, row_names;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_rows() const { return static_cast<int>(b.size()); }

  int add_var(const std::string& name, double lo, double up, double cost);
  void add_row(RowSense sense, double rhs,
               const std::vector<std::pair<int, double>>& coefs,
               const std::string& name);
};

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd duals;          // one per row
  Eigen::VectorXd reduced_costs;  // one per variable
  int iterations = 0;
};

LpSolution solve_lp(const LpProblem& p);

Eigen::VectorXd lp_residuals(const LpProblem& p, const Eigen::VectorXd& x);

std::string dump_lp(const LpProblem& p);

}  // namespace gridstart
