#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "gridstart/lp.hpp"

using namespace gridstart;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  double u = (rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// Brute-force reference: enumerate every basic point (n active hyperplanes
// drawn from rows and variable bounds), keep the feasible ones, take the min.
// Only valid when every variable has finite bounds.
struct BruteForce {
  bool feasible = false;
  double objective = 0.0;
  Eigen::VectorXd x;
};

BruteForce brute_force_lp(const LpProblem& p, double tol = 1e-9) {
  const int n = p.num_vars();
  const int m = p.num_rows();
  struct Plane {
    Eigen::VectorXd a;
    double b;
  };
  std::vector<Plane> planes;
  for (int i = 0; i < m; ++i) planes.push_back({p.a.row(i).transpose(), p.b(i)});
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(j) = 1.0;
    planes.push_back({e, p.lower(j)});
    planes.push_back({e, p.upper(j)});
  }

  BruteForce best;
  const int np = static_cast<int>(planes.size());
  std::vector<int> idx(n);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      Eigen::MatrixXd M(n, n);
      Eigen::VectorXd rhs(n);
      for (int k = 0; k < n; ++k) {
        M.row(k) = planes[idx[k]].a.transpose();
        rhs(k) = planes[idx[k]].b;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
      if (!lu.isInvertible()) return;
      Eigen::VectorXd x = lu.solve(rhs);
      for (int j = 0; j < n; ++j)
        if (x(j) < p.lower(j) - tol || x(j) > p.upper(j) + tol) return;
      Eigen::VectorXd ax = p.a * x;
      for (int i = 0; i < m; ++i) {
        double d = ax(i) - p.b(i);
        if (p.senses[i] == RowSense::le && d > tol) return;
        if (p.senses[i] == RowSense::ge && d < -tol) return;
        if (p.senses[i] == RowSense::eq && std::abs(d) > tol) return;
      }
      double obj = p.c.dot(x) + p.objective_constant;
      if (!best.feasible || obj < best.objective) {
        best.feasible = true;
        best.objective = obj;
        best.x = x;
      }
      return;
    }
    for (int i = start; i <= np - (n - depth); ++i) {
      idx[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  if (n > 0) rec(0, 0);
  return best;
}

LpProblem random_bounded_lp(std::mt19937_64& rng) {
  LpProblem p;
  int n = 1 + static_cast<int>(rng() % 5);
  int m = 1 + static_cast<int>(rng() % 8);
  for (int j = 0; j < n; ++j) {
    double lo = -uniform(rng, 0.5, 3.0);
    double up = uniform(rng, 0.5, 3.0);
    p.add_var("x" + std::to_string(j), lo, up, uniform(rng, -3.0, 3.0));
  }
  Eigen::VectorXd x0(n);
  for (int j = 0; j < n; ++j) {
    double lo = p.lower(j), up = p.upper(j);
    x0(j) = uniform(rng, lo + 0.1 * (up - lo), up - 0.1 * (up - lo));
  }
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, double>> coefs;
    double ax0 = 0.0;
    for (int j = 0; j < n; ++j) {
      if (uniform(rng, 0.0, 1.0) < 0.3 && n > 1) continue;
      double a = uniform(rng, -2.0, 2.0);
      coefs.push_back({j, a});
      ax0 += a * x0(j);
    }
    if (coefs.empty()) coefs.push_back({0, 1.0}), ax0 = x0(0);
    double r = uniform(rng, 0.0, 1.0);
    if (r < 0.2) {
      p.add_row(RowSense::eq, ax0, coefs, "r" + std::to_string(i));
    } else if (r < 0.6) {
      p.add_row(RowSense::le, ax0 + uniform(rng, 0.0, 2.0), coefs, "r" + std::to_string(i));
    } else {
      p.add_row(RowSense::ge, ax0 - uniform(rng, 0.0, 2.0), coefs, "r" + std::to_string(i));
    }
  }
  return p;
}

// Lagrangian dual value for duals y with sign conventions le: y<=0, ge: y>=0.
// Lower-bounds the optimum whenever those conventions hold.
double dual_objective(const LpProblem& p, const LpSolution& s) {
  double g = s.duals.size() ? s.duals.dot(p.b) : 0.0;
  for (int j = 0; j < p.num_vars(); ++j) {
    double d = p.c(j) - (s.duals.size() ? s.duals.dot(p.a.col(j)) : 0.0);
    g += std::min(d * p.lower(j), d * p.upper(j));
  }
  return g + p.objective_constant;
}

}  // namespace

TEST_CASE("two variable hand example") {
  LpProblem p;
  int x = p.add_var("x", 0, 10, -1.0);
  int y = p.add_var("y", 0, 10, -2.0);
  p.add_row(RowSense::le, 3.0, {{x, 1.0}, {y, 1.0}}, "sum");
  p.add_row(RowSense::le, 2.0, {{x, 1.0}}, "capx");
  p.add_row(RowSense::le, 2.0, {{y, 1.0}}, "capy");
  LpSolution s = solve_lp(p);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK(s.objective == doctest::Approx(-5.0).epsilon(1e-12));
  CHECK(s.x(x) == doctest::Approx(1.0));
  CHECK(s.x(y) == doctest::Approx(2.0));
  // At (1,2) rows 1 and 3 are tight; both vars sit strictly inside their
  // bounds, so c = A'y with y2 = 0.
  CHECK(s.duals(0) == doctest::Approx(-1.0));
  CHECK(s.duals(1) == doctest::Approx(0.0));
  CHECK(s.duals(2) == doctest::Approx(-1.0));
  CHECK(s.reduced_costs(x) == doctest::Approx(0.0));
  CHECK(s.reduced_costs(y) == doctest::Approx(0.0));
  CHECK(dual_objective(p, s) == doctest::Approx(-5.0).epsilon(1e-9));
}

TEST_CASE("equality row and objective constant") {
  LpProblem p;
  int x = p.add_var("x", 0, 5, 1.0);
  int y = p.add_var("y", 0, 5, 1.0);
  p.objective_constant = 7.0;
  p.add_row(RowSense::eq, 2.0, {{x, 1.0}, {y, 1.0}}, "bal");
  LpSolution s = solve_lp(p);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK(s.objective == doctest::Approx(9.0));
  CHECK(s.x(x) + s.x(y) == doctest::Approx(2.0));
}

TEST_CASE("optimum on an upper bound uses a bound flip") {
  LpProblem p;
  int x = p.add_var("x", 0, 1, -1.0);
  p.add_row(RowSense::le, 5.0, {{x, 1.0}}, "loose");
  LpSolution s = solve_lp(p);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK(s.objective == doctest::Approx(-1.0));
  CHECK(s.x(x) == doctest::Approx(1.0));
}

TEST_CASE("free variable") {
  LpProblem p;
  int x = p.add_var("x", -kInf, kInf, -1.0);
  int y = p.add_var("y", 0, 10, 1.0);
  p.add_row(RowSense::le, 2.0, {{x, 1.0}, {y, -1.0}}, "r1");
  p.add_row(RowSense::le, 4.0, {{x, 1.0}, {y, 1.0}}, "r2");
  LpSolution s = solve_lp(p);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK(s.objective == doctest::Approx(-2.0));
  CHECK(s.x(x) == doctest::Approx(3.0));
  CHECK(s.x(y) == doctest::Approx(1.0));
}

TEST_CASE("degenerate duplicate rows still terminate") {
  LpProblem p;
  int x = p.add_var("x", 0, 2, -1.0);
  p.add_row(RowSense::le, 1.0, {{x, 1.0}}, "a");
  p.add_row(RowSense::le, 1.0, {{x, 1.0}}, "b");
  p.add_row(RowSense::le, 1.0, {{x, 1.0}}, "c");
  LpSolution s = solve_lp(p);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK(s.objective == doctest::Approx(-1.0));
}

TEST_CASE("infeasible detected") {
  LpProblem p;
  int x = p.add_var("x", 0, 1, 1.0);
  p.add_row(RowSense::ge, 2.0, {{x, 1.0}}, "need2");
  LpSolution s = solve_lp(p);
  CHECK(s.status == LpStatus::infeasible);
}

TEST_CASE("infeasible equality pair detected") {
  LpProblem p;
  int x = p.add_var("x", -5, 5, 0.0);
  int y = p.add_var("y", -5, 5, 0.0);
  p.add_row(RowSense::eq, 1.0, {{x, 1.0}, {y, 1.0}}, "a");
  p.add_row(RowSense::eq, 3.0, {{x, 1.0}, {y, 1.0}}, "b");
  LpSolution s = solve_lp(p);
  CHECK(s.status == LpStatus::infeasible);
}

TEST_CASE("unbounded detected") {
  LpProblem p;
  int x = p.add_var("x", 0, kInf, -1.0);
  p.add_row(RowSense::ge, 0.0, {{x, 1.0}}, "r");
  LpSolution s = solve_lp(p);
  CHECK(s.status == LpStatus::unbounded);

  LpProblem q;
  q.add_var("x", -kInf, kInf, 1.0);
  CHECK(solve_lp(q).status == LpStatus::unbounded);
}

TEST_CASE("no rows reduces to bound selection") {
  LpProblem p;
  int x = p.add_var("x", -1, 2, 1.0);
  int y = p.add_var("y", -1, 2, -1.0);
  LpSolution s = solve_lp(p);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK(s.x(x) == doctest::Approx(-1.0));
  CHECK(s.x(y) == doctest::Approx(2.0));
  CHECK(s.objective == doctest::Approx(-3.0));
}

TEST_CASE("lp_residuals measures signed violation by sense") {
  LpProblem p;
  int x = p.add_var("x", 0, 10, 0.0);
  p.add_row(RowSense::le, 1.0, {{x, 1.0}}, "le");
  p.add_row(RowSense::ge, 3.0, {{x, 1.0}}, "ge");
  p.add_row(RowSense::eq, 2.0, {{x, 1.0}}, "eq");
  Eigen::VectorXd v(1);
  v << 2.0;
  Eigen::VectorXd r = lp_residuals(p, v);
  CHECK(r(0) == doctest::Approx(1.0));
  CHECK(r(1) == doctest::Approx(1.0));
  CHECK(r(2) == doctest::Approx(0.0));
}

TEST_CASE("dump_lp mentions variables and rows") {
  LpProblem p;
  p.add_var("pg2", 0, 6, 1.3);
  p.add_row(RowSense::le, 1.6, {{0, 1.0}}, "flow13");
  std::string text = dump_lp(p);
  CHECK(text.find("pg2") != std::string::npos);
  CHECK(text.find("flow13") != std::string::npos);
}

TEST_CASE("random bounded LPs match vertex enumeration and satisfy duality") {
  std::mt19937_64 rng(20240811);
  int solved = 0;
  for (int t = 0; t < 50; ++t) {
    LpProblem p = random_bounded_lp(rng);
    BruteForce ref = brute_force_lp(p);
    REQUIRE(ref.feasible);
    LpSolution s = solve_lp(p);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(std::abs(s.objective - ref.objective) <= 1e-7);

    for (int j = 0; j < p.num_vars(); ++j) {
      CHECK(s.x(j) >= p.lower(j) - 1e-9);
      CHECK(s.x(j) <= p.upper(j) + 1e-9);
    }
    CHECK(lp_residuals(p, s.x).maxCoeff() <= 1e-8);

    REQUIRE(s.duals.size() == p.num_rows());
    for (int i = 0; i < p.num_rows(); ++i) {
      if (p.senses[i] == RowSense::le) CHECK(s.duals(i) <= 1e-7);
      if (p.senses[i] == RowSense::ge) CHECK(s.duals(i) >= -1e-7);
    }
    double g = dual_objective(p, s);
    CHECK(g <= s.objective + 1e-7);
    CHECK(std::abs(g - s.objective) <= 1e-7);
    ++solved;
  }
  CHECK(solved == 50);
}

TEST_CASE("solver is deterministic across repeat calls") {
  std::mt19937_64 rng(7);
  LpProblem p = random_bounded_lp(rng);
  LpSolution a = solve_lp(p);
  LpSolution b = solve_lp(p);
  REQUIRE(a.status == b.status);
  CHECK(a.objective == b.objective);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.iterations == b.iterations);
}
