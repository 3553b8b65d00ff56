#include "gridstart/lp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gridstart/textio.hpp"

namespace gridstart {

int LpProblem::add_var(const std::string& name, double lo, double up, double cost) {
  int idx = num_vars();
  c.conservativeResize(idx + 1);
  c(idx) = cost;
  lower.conservativeResize(idx + 1);
  lower(idx) = lo;
  upper.conservativeResize(idx + 1);
  upper(idx) = up;
  a.conservativeResize(num_rows(), idx + 1);
  if (num_rows() > 0) a.col(idx).setZero();
  var_names.push_back(name);
  return idx;
}

void LpProblem::add_row(RowSense sense, double rhs,
                        const std::vector<std::pair<int, double>>& coefs,
                        const std::string& name) {
  int r = num_rows();
  a.conservativeResize(r + 1, num_vars());
  a.row(r).setZero();
  for (const auto& [j, v] : coefs) {
    if (j < 0 || j >= num_vars()) throw std::out_of_range("add_row: bad variable index");
    a(r, j) += v;
  }
  b.conservativeResize(r + 1);
  b(r) = rhs;
  senses.push_back(sense);
  row_names.push_back(name);
}

namespace {

constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr int kIterationCap = 20000;

enum VarStatus { kAtLower, kAtUpper, kBasic };

std::string var_label(const LpProblem& p, int j) {
  if (j < static_cast<int>(p.var_names.size()) && !p.var_names[j].empty()) return p.var_names[j];
  return "x" + std::to_string(j);
}

// Dense bounded-variable two-phase primal simplex.  Columns are the
// structural variables followed by one slack per inequality row and one
// artificial per row; every row is an equality internally.
class Simplex {
 public:
  explicit Simplex(const LpProblem& p) : p_(p) {
    m_ = p.num_rows();
    ns_ = p.num_vars();
    int nslack = 0;
    for (auto s : p.senses)
      if (s != RowSense::eq) ++nslack;
    n_ = ns_ + nslack;
    ntot_ = n_ + m_;

    a_.setZero(m_, ntot_);
    a_.leftCols(ns_) = p.a;
    lo_.resize(ntot_);
    up_.resize(ntot_);
    for (int j = 0; j < ns_; ++j) {
      lo_(j) = p.lower(j);
      up_(j) = p.upper(j);
    }
    int sj = ns_;
    for (int i = 0; i < m_; ++i) {
      if (p.senses[i] == RowSense::eq) continue;
      a_(i, sj) = (p.senses[i] == RowSense::le) ? 1.0 : -1.0;
      lo_(sj) = 0.0;
      up_(sj) = kInf;
      ++sj;
    }
    for (int i = 0; i < m_; ++i) {
      lo_(n_ + i) = 0.0;
      up_(n_ + i) = kInf;
    }

    status_.assign(ntot_, kAtLower);
    x_.setZero(ntot_);
    basis_.resize(m_);
  }

  LpSolution run() {
    LpSolution sol;
    if (m_ == 0) return solve_unconstrained();

    // Nonbasic start at the finite bound nearest zero; free variables at 0.
    for (int j = 0; j < n_; ++j) x_(j) = start_value(j);

    Eigen::VectorXd resid = p_.b;
    for (int j = 0; j < n_; ++j)
      if (x_(j) != 0.0) resid -= a_.col(j) * x_(j);
    for (int i = 0; i < m_; ++i) {
      int aj = n_ + i;
      a_(i, aj) = (resid(i) >= 0.0) ? 1.0 : -1.0;
      x_(aj) = std::abs(resid(i));
      basis_[i] = aj;
      status_[aj] = kBasic;
    }

    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(ntot_);
    c1.tail(m_).setOnes();
    LpStatus st = iterate(c1, /*phase1=*/true);
    if (st != LpStatus::optimal) throw std::logic_error("phase 1 cannot be unbounded");
    double art_sum = x_.tail(m_).sum();
    if (art_sum > 1e-7) {
      sol.status = LpStatus::infeasible;
      sol.iterations = iterations_;
      return sol;
    }
    pin_artificials();

    Eigen::VectorXd c2 = Eigen::VectorXd::Zero(ntot_);
    c2.head(ns_) = p_.c;
    st = iterate(c2, /*phase1=*/false);

    sol.status = st;
    sol.iterations = iterations_;
    if (st != LpStatus::optimal) return sol;

    sol.x = x_.head(ns_);
    sol.objective = p_.c.dot(sol.x) + p_.objective_constant;
    sol.duals = last_y_;
    sol.reduced_costs.resize(ns_);
    for (int j = 0; j < ns_; ++j) sol.reduced_costs(j) = p_.c(j) - last_y_.dot(a_.col(j));
    return sol;
  }

 private:
  double start_value(int j) const {
    if (std::isfinite(lo_(j))) return lo_(j);
    if (std::isfinite(up_(j))) return up_(j);
    return 0.0;
  }

  bool is_free(int j) const { return !std::isfinite(lo_(j)) && !std::isfinite(up_(j)); }

  // Artificials that phase 1 left basic at zero are pivoted out when their
  // row has a usable column; rows with none are redundant and the
  // artificial stays pinned at zero.
  void pin_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      factorize();
      for (int j = 0; j < n_; ++j) {
        if (status_[j] == kBasic || lo_(j) == up_(j)) continue;
        Eigen::VectorXd w = lu_.solve(a_.col(j));
        if (std::abs(w(i)) > kPivotTol) {
          int art = basis_[i];
          status_[art] = kAtLower;
          x_(art) = 0.0;
          basis_[i] = j;
          status_[j] = kBasic;
          break;
        }
      }
    }
    for (int j = n_; j < ntot_; ++j) up_(j) = 0.0;
  }

  void factorize() {
    Eigen::MatrixXd bm(m_, m_);
    for (int i = 0; i < m_; ++i) bm.col(i) = a_.col(basis_[i]);
    lu_.compute(bm);
  }

  void recompute_basics() {
    Eigen::VectorXd rhs = p_.b;
    for (int j = 0; j < ntot_; ++j)
      if (status_[j] != kBasic && x_(j) != 0.0) rhs -= a_.col(j) * x_(j);
    Eigen::VectorXd xb = lu_.solve(rhs);
    for (int i = 0; i < m_; ++i) x_(basis_[i]) = xb(i);
  }

  LpStatus iterate(const Eigen::VectorXd& c, bool phase1) {
    int degenerate_run = 0;
    while (true) {
      if (++iterations_ > kIterationCap) throw std::runtime_error("simplex: iteration cap exceeded");
      factorize();
      recompute_basics();

      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb(i) = c(basis_[i]);
      Eigen::VectorXd y = lu_.transpose().solve(cb);
      last_y_ = y;

      // Dantzig pricing with the lowest index on ties; Bland's rule after a
      // long degenerate run to rule out cycling.
      bool bland = degenerate_run > 2 * ntot_;
      int enter = -1;
      double enter_dir = 1.0;
      double best = kDualTol;
      for (int j = 0; j < ntot_; ++j) {
        if (status_[j] == kBasic || lo_(j) == up_(j)) continue;
        double d = c(j) - y.dot(a_.col(j));
        double dir;
        if (is_free(j)) {
          if (std::abs(d) <= kDualTol) continue;
          dir = (d < 0.0) ? 1.0 : -1.0;
        } else if (status_[j] == kAtLower) {
          if (d >= -kDualTol) continue;
          dir = 1.0;
        } else {
          if (d <= kDualTol) continue;
          dir = -1.0;
        }
        if (bland) {
          enter = j;
          enter_dir = dir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          enter_dir = dir;
        }
      }
      if (enter < 0) return LpStatus::optimal;

      Eigen::VectorXd w = lu_.solve(a_.col(enter));

      // Ratio test: the entering variable moves enter_dir * delta; basic i
      // moves at rate(i) = -enter_dir * w(i).
      double limit = kInf;
      int leave_row = -1;
      double leave_to = 0.0;
      double own_range = up_(enter) - lo_(enter);
      if (std::isfinite(own_range)) limit = own_range;

      for (int i = 0; i < m_; ++i) {
        double rate = -enter_dir * w(i);
        if (std::abs(rate) <= kPivotTol) continue;
        int bj = basis_[i];
        double bound = (rate > 0.0) ? up_(bj) : lo_(bj);
        if (!std::isfinite(bound)) continue;
        double step = (bound - x_(bj)) / rate;
        if (step < 0.0) step = 0.0;
        bool take = false;
        if (step < limit - 1e-12) {
          take = true;
        } else if (step <= limit + 1e-12 && leave_row >= 0 && bland && bj < basis_[leave_row]) {
          take = true;
        }
        if (take) {
          limit = step;
          leave_row = i;
          leave_to = bound;
        }
      }

      if (!std::isfinite(limit)) {
        if (phase1) throw std::logic_error("phase 1 unbounded");
        return LpStatus::unbounded;
      }

      degenerate_run = (limit < 1e-10) ? degenerate_run + 1 : 0;

      if (leave_row < 0) {
        // Bound flip: the entering variable crosses to its other bound.
        x_(enter) += enter_dir * limit;
        status_[enter] = (status_[enter] == kAtLower) ? kAtUpper : kAtLower;
        continue;
      }

      int leave = basis_[leave_row];
      x_(enter) += enter_dir * limit;
      status_[enter] = kBasic;
      x_(leave) = leave_to;
      status_[leave] = (std::isfinite(up_(leave)) && leave_to == up_(leave)) ? kAtUpper : kAtLower;
      basis_[leave_row] = enter;
    }
  }

  LpSolution solve_unconstrained() {
    LpSolution sol;
    sol.x.resize(ns_);
    for (int j = 0; j < ns_; ++j) {
      double v;
      if (p_.c(j) > 0.0)
        v = lo_(j);
      else if (p_.c(j) < 0.0)
        v = up_(j);
      else
        v = std::isfinite(lo_(j)) ? lo_(j) : (std::isfinite(up_(j)) ? std::min(up_(j), 0.0) : 0.0);
      if (!std::isfinite(v)) {
        sol.status = LpStatus::unbounded;
        return sol;
      }
      sol.x(j) = v;
    }
    sol.status = LpStatus::optimal;
    sol.objective = p_.c.dot(sol.x) + p_.objective_constant;
    sol.duals.resize(0);
    sol.reduced_costs = p_.c;
    return sol;
  }

  const LpProblem& p_;
  int m_ = 0, ns_ = 0, n_ = 0, ntot_ = 0;
  Eigen::MatrixXd a_;
  Eigen::VectorXd lo_, up_, x_;
  std::vector<int> status_;
  std::vector<int> basis_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  Eigen::VectorXd last_y_;
  int iterations_ = 0;
};

}  // namespace

LpSolution solve_lp(const LpProblem& p) {
  if (p.num_rows() != p.a.rows() || p.num_vars() != p.a.cols())
    throw std::invalid_argument("solve_lp: inconsistent matrix shape");
  if (static_cast<int>(p.senses.size()) != p.num_rows())
    throw std::invalid_argument("solve_lp: senses/b size mismatch");
  for (int j = 0; j < p.num_vars(); ++j)
    if (p.lower(j) > p.upper(j)) {
      LpSolution sol;
      sol.status = LpStatus::infeasible;
      return sol;
    }
  Simplex s(p);
  return s.run();
}

Eigen::VectorXd lp_residuals(const LpProblem& p, const Eigen::VectorXd& x) {
  Eigen::VectorXd ax = p.a * x;
  Eigen::VectorXd r(p.num_rows());
  for (int i = 0; i < p.num_rows(); ++i) {
    double d = ax(i) - p.b(i);
    switch (p.senses[i]) {
      case RowSense::le: r(i) = std::max(0.0, d); break;
      case RowSense::ge: r(i) = std::max(0.0, -d); break;
      case RowSense::eq: r(i) = std::abs(d); break;
    }
  }
  return r;
}

std::string dump_lp(const LpProblem& p) {
  std::ostringstream os;
  os << "minimize\n  ";
  bool first = true;
  for (int j = 0; j < p.num_vars(); ++j) {
    if (p.c(j) == 0.0) continue;
    if (!first) os << " + ";
    os << format_double(p.c(j)) << " " << var_label(p, j);
    first = false;
  }
  if (p.objective_constant != 0.0) {
    if (!first) os << " + ";
    os << format_double(p.objective_constant);
    first = false;
  }
  if (first) os << "0";
  os << "\nsubject to\n";
  for (int i = 0; i < p.num_rows(); ++i) {
    os << "  ";
    if (i < static_cast<int>(p.row_names.size()) && !p.row_names[i].empty())
      os << p.row_names[i] << ": ";
    bool f = true;
    for (int j = 0; j < p.num_vars(); ++j) {
      if (p.a(i, j) == 0.0) continue;
      if (!f) os << " + ";
      os << format_double(p.a(i, j)) << " " << var_label(p, j);
      f = false;
    }
    if (f) os << "0";
    const char* rel = p.senses[i] == RowSense::le ? "<=" : (p.senses[i] == RowSense::ge ? ">=" : "=");
    os << " " << rel << " " << format_double(p.b(i)) << "\n";
  }
  os << "bounds\n";
  for (int j = 0; j < p.num_vars(); ++j) {
    os << "  " << format_double(p.lower(j)) << " <= " << var_label(p, j) << " <= "
       << format_double(p.upper(j)) << "\n";
  }
  return os.str();
}

}  // namespace gridstart
