#include "gridstart/powerflow.hpp"

#include <cmath>
#include <stdexcept>

namespace gridstart {

LoadScenario bus3_scenario(const NetworkCase& c, double p3l_mw, double q3l_mvar) {
  LoadScenario s;
  s.p_mw.assign(c.buses.size(), 0.0);
  s.q_mvar.assign(c.buses.size(), 0.0);
  int i = c.bus_index(3);
  if (i < 0) throw std::runtime_error("bus3_scenario: case has no bus 3");
  s.p_mw[i] = p3l_mw;
  s.q_mvar[i] = q3l_mvar;
  return s;
}

PfSystem::PfSystem(const NetworkCase& c, const AdmittanceMatrix& ybus,
                   std::vector<BusKind> kinds, Eigen::VectorXd p_sched_pu,
                   Eigen::VectorXd q_sched_pu, Eigen::VectorXd v_sched_pu)
    : y_(ybus),
      kinds_(std::move(kinds)),
      p_sched_(std::move(p_sched_pu)),
      q_sched_(std::move(q_sched_pu)),
      v_sched_(std::move(v_sched_pu)) {
  const int n = static_cast<int>(c.buses.size());
  for (int i = 0; i < n; ++i)
    if (kinds_[i] != BusKind::slack) angle_vars_.push_back(i);
  for (int i = 0; i < n; ++i)
    if (kinds_[i] == BusKind::pq) vmag_vars_.push_back(i);
}

Eigen::VectorXcd PfSystem::voltages(const Eigen::VectorXd& x) const {
  const int n = y_.n;
  Eigen::VectorXd ang = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd mag = v_sched_;
  for (size_t k = 0; k < angle_vars_.size(); ++k) ang[angle_vars_[k]] = x[k];
  for (size_t k = 0; k < vmag_vars_.size(); ++k)
    mag[vmag_vars_[k]] = x[angle_vars_.size() + k];
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = std::polar(mag[i], ang[i]);
  return v;
}

Eigen::VectorXcd PfSystem::injections(const Eigen::VectorXd& x) const {
  Eigen::VectorXcd v = voltages(x);
  return v.array() * (y_.entries * v).array().conjugate();
}

Eigen::VectorXd PfSystem::pack(const std::vector<std::complex<double>>& v) const {
  Eigen::VectorXd x(dim());
  for (size_t k = 0; k < angle_vars_.size(); ++k) x[k] = std::arg(v[angle_vars_[k]]);
  for (size_t k = 0; k < vmag_vars_.size(); ++k)
    x[angle_vars_.size() + k] = std::abs(v[vmag_vars_[k]]);
  return x;
}

std::vector<std::complex<double>> PfSystem::unpack(const Eigen::VectorXd& x) const {
  Eigen::VectorXcd v = voltages(x);
  return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd PfSystem::mismatch(const Eigen::VectorXd& x) const {
  Eigen::VectorXcd s = injections(x);
  Eigen::VectorXd m(dim());
  for (size_t k = 0; k < angle_vars_.size(); ++k) {
    int i = angle_vars_[k];
    m[k] = p_sched_[i] - s[i].real();
  }
  for (size_t k = 0; k < vmag_vars_.size(); ++k) {
    int i = vmag_vars_[k];
    m[angle_vars_.size() + k] = q_sched_[i] - s[i].imag();
  }
  return m;
}

Eigen::MatrixXd PfSystem::jacobian(const Eigen::VectorXd& x) const {
  const Eigen::VectorXcd v = voltages(x);
  const Eigen::VectorXcd s = v.array() * (y_.entries * v).array().conjugate();
  const Eigen::MatrixXd g = y_.entries.real();
  const Eigen::MatrixXd b = y_.entries.imag();
  const int na = static_cast<int>(angle_vars_.size());
  const int nv = static_cast<int>(vmag_vars_.size());
  Eigen::MatrixXd jac(na + nv, na + nv);
  auto vm = [&](int i) { return std::abs(v[i]); };
  auto va = [&](int i) { return std::arg(v[i]); };
  // dP_i/dth_k, dP_i/dV_k, dQ_i/dth_k, dQ_i/dV_k, standard polar forms
  auto dp_dth = [&](int i, int k) {
    if (i == k) return -s[i].imag() - b(i, i) * vm(i) * vm(i);
    double d = va(i) - va(k);
    return vm(i) * vm(k) * (g(i, k) * std::sin(d) - b(i, k) * std::cos(d));
  };
  auto dp_dv = [&](int i, int k) {
    if (i == k) return s[i].real() / vm(i) + g(i, i) * vm(i);
    double d = va(i) - va(k);
    return vm(i) * (g(i, k) * std::cos(d) + b(i, k) * std::sin(d));
  };
  auto dq_dth = [&](int i, int k) {
    if (i == k) return s[i].real() - g(i, i) * vm(i) * vm(i);
    double d = va(i) - va(k);
    return -vm(i) * vm(k) * (g(i, k) * std::cos(d) + b(i, k) * std::sin(d));
  };
  auto dq_dv = [&](int i, int k) {
    if (i == k) return s[i].imag() / vm(i) - b(i, i) * vm(i);
    double d = va(i) - va(k);
    return vm(i) * (g(i, k) * std::sin(d) - b(i, k) * std::cos(d));
  };
  for (int r = 0; r < na; ++r) {
    int i = angle_vars_[r];
    for (int cidx = 0; cidx < na; ++cidx) jac(r, cidx) = dp_dth(i, angle_vars_[cidx]);
    for (int cidx = 0; cidx < nv; ++cidx) jac(r, na + cidx) = dp_dv(i, vmag_vars_[cidx]);
  }
  for (int r = 0; r < nv; ++r) {
    int i = vmag_vars_[r];
    for (int cidx = 0; cidx < na; ++cidx) jac(na + r, cidx) = dq_dth(i, angle_vars_[cidx]);
    for (int cidx = 0; cidx < nv; ++cidx)
      jac(na + r, na + cidx) = dq_dv(i, vmag_vars_[cidx]);
  }
  return jac;
}

namespace {

struct SwitchState {
  std::vector<BusKind> kinds;
  Eigen::VectorXd q_sched;           // pu, valid at PQ rows
  std::vector<int> limited_gen;      // per bus: generator index pinned, or -1
  std::vector<int> limit_side;       // per bus: +1 at q_max, -1 at q_min
};

}  // namespace

PowerFlowSolution solve_power_flow(const NetworkCase& c, const DispatchSetpoint& setpoint,
                                   const LoadScenario& scenario,
                                   const PfOptions& options) {
  const int n = static_cast<int>(c.buses.size());
  const int ng = static_cast<int>(c.generators.size());
  if (static_cast<int>(setpoint.gen_p_mw.size()) != ng ||
      static_cast<int>(setpoint.gen_v_pu.size()) != ng)
    throw std::runtime_error("solve_power_flow: setpoint size mismatch");
  if (static_cast<int>(scenario.p_mw.size()) != n ||
      static_cast<int>(scenario.q_mvar.size()) != n)
    throw std::runtime_error("solve_power_flow: scenario size mismatch");
  const AdmittanceMatrix ybus = build_ybus(c);
  const double base = c.base_mva;

  Eigen::VectorXd p_sched = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v_sched = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i) p_sched[i] = -scenario.p_mw[i] / base;
  for (int g = 0; g < ng; ++g) {
    int bi = c.bus_index(c.generators[g].bus);
    if (c.buses[bi].kind != BusKind::slack) p_sched[bi] += setpoint.gen_p_mw[g] / base;
    v_sched[bi] = setpoint.gen_v_pu[g];
  }

  SwitchState sw;
  sw.kinds.resize(n);
  for (int i = 0; i < n; ++i) sw.kinds[i] = c.buses[i].kind;
  sw.q_sched = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    if (sw.kinds[i] == BusKind::pq) sw.q_sched[i] = -scenario.q_mvar[i] / base;
  sw.limited_gen.assign(n, -1);
  sw.limit_side.assign(n, 0);

  std::vector<std::complex<double>> v(n);
  if (options.flat_start || options.initial_v.size() != static_cast<size_t>(n)) {
    for (int i = 0; i < n; ++i) v[i] = v_sched[i];
    for (int i = 0; i < n; ++i)
      if (sw.kinds[i] == BusKind::pq && c.generator_at(c.buses[i].id) < 0)
        v[i] = 1.0;
  } else {
    v = options.initial_v;
  }

  PowerFlowSolution sol;
  sol.gen_q_limited.assign(ng, false);
  int iterations = 0;
  bool converged = false;
  double max_mismatch = 0.0;

  for (int round = 0; round < 12 && !converged; ++round) {
    PfSystem sys(c, ybus, sw.kinds, p_sched, sw.q_sched, v_sched);
    Eigen::VectorXd x = sys.pack(v);
    while (iterations < options.max_iterations) {
      ++iterations;
      Eigen::VectorXd m = sys.mismatch(x);
      max_mismatch = m.lpNorm<Eigen::Infinity>();
      if (!std::isfinite(max_mismatch)) break;
      bool switched = false;
      if (max_mismatch < 1e-2 || max_mismatch < options.tolerance) {
        // Q-limit check: pin PV buses whose generator leaves its band;
        // release pinned buses whose voltage drifts past the setpoint.
        Eigen::VectorXcd s = sys.injections(x);
        std::vector<std::complex<double>> vcur = sys.unpack(x);
        for (int i = 0; options.enforce_q_limits && i < n && !switched; ++i) {
          if (sw.kinds[i] == BusKind::pv) {
            int g = c.generator_at(c.buses[i].id);
            if (g < 0) continue;
            double qg = s[i].imag() * base + scenario.q_mvar[i];
            const Generator& gen = c.generators[g];
            if (qg > gen.q_max + 1e-7 || qg < gen.q_min - 1e-7) {
              int side = qg > gen.q_max ? +1 : -1;
              sw.kinds[i] = BusKind::pq;
              sw.q_sched[i] =
                  ((side > 0 ? gen.q_max : gen.q_min) - scenario.q_mvar[i]) / base;
              sw.limited_gen[i] = g;
              sw.limit_side[i] = side;
              sol.gen_q_limited[g] = true;
              switched = true;
            }
          } else if (sw.limited_gen[i] >= 0) {
            double vm = std::abs(vcur[i]);
            if ((sw.limit_side[i] > 0 && vm > v_sched[i] + 1e-9) ||
                (sw.limit_side[i] < 0 && vm < v_sched[i] - 1e-9)) {
              sw.kinds[i] = BusKind::pv;
              sol.gen_q_limited[sw.limited_gen[i]] = false;
              sw.limited_gen[i] = -1;
              sw.limit_side[i] = 0;
              switched = true;
            }
          }
        }
        if (switched) {
          v = sys.unpack(x);
          break;  // rebuild the system with the new bus kinds
        }
        if (max_mismatch < options.tolerance) {
          converged = true;
          v = sys.unpack(x);
          break;
        }
      }
      Eigen::MatrixXd jac = sys.jacobian(x);
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
      Eigen::VectorXd dx = lu.solve(m);
      if (!dx.allFinite())
        throw std::runtime_error("solve_power_flow: singular Jacobian at iteration " +
                                 std::to_string(iterations));
      x += dx;
      v = sys.unpack(x);
    }
    if (!std::isfinite(max_mismatch)) break;
    if (iterations >= options.max_iterations) break;
  }

  sol.converged = converged;
  sol.iterations = iterations;
  sol.max_mismatch_pu = max_mismatch;
  sol.v_mag_pu.resize(n);
  sol.v_ang_rad.resize(n);
  Eigen::VectorXcd vv(n);
  for (int i = 0; i < n; ++i) {
    vv[i] = v[i];
    sol.v_mag_pu[i] = std::abs(v[i]);
    sol.v_ang_rad[i] = std::arg(v[i]);
  }
  Eigen::VectorXcd inj = vv.array() * (ybus.entries * vv).array().conjugate();

  sol.flows.resize(c.branches.size());
  for (size_t bidx = 0; bidx < c.branches.size(); ++bidx) {
    const Branch& br = c.branches[bidx];
    int i = c.bus_index(br.from_bus), j = c.bus_index(br.to_bus);
    std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    std::complex<double> ysh(0.0, br.b_charging / 2.0);
    std::complex<double> if_ = ys * (vv[i] - vv[j]) + ysh * vv[i];
    std::complex<double> it_ = ys * (vv[j] - vv[i]) + ysh * vv[j];
    sol.flows[bidx].from_mva = vv[i] * std::conj(if_) * base;
    sol.flows[bidx].to_mva = vv[j] * std::conj(it_) * base;
  }

  sol.gen_p_mw.assign(ng, 0.0);
  sol.gen_q_mvar.assign(ng, 0.0);
  std::vector<bool> bus_q_assigned(n, false);
  for (int g = 0; g < ng; ++g) {
    int bi = c.bus_index(c.generators[g].bus);
    if (c.buses[bi].kind == BusKind::slack) {
      sol.gen_p_mw[g] = inj[bi].real() * base + scenario.p_mw[bi];
    } else {
      sol.gen_p_mw[g] = setpoint.gen_p_mw[g];
    }
    if (!bus_q_assigned[bi]) {
      sol.gen_q_mvar[g] = inj[bi].imag() * base + scenario.q_mvar[bi];
      bus_q_assigned[bi] = true;
    }
  }
  int sb = c.slack_index();
  if (sb >= 0) {
    sol.slack_p_mw = inj[sb].real() * base + scenario.p_mw[sb];
    sol.slack_q_mvar = inj[sb].imag() * base + scenario.q_mvar[sb];
  }
  return sol;
}

double slack_change(const PowerFlowSolution& solution, double intended_slack_p_mw) {
  if (!solution.converged)
    throw std::invalid_argument("slack_change: solution not converged");
  return std::abs(solution.slack_p_mw - intended_slack_p_mw);
}

std::vector<double> thermal_violation(const PowerFlowSolution& solution,
                                      const NetworkCase& c) {
  std::vector<double> out(c.branches.size(), 0.0);
  for (size_t i = 0; i < c.branches.size(); ++i) {
    double rating = c.branches[i].rating_mva;
    if (rating <= 0.0) continue;
    double s = std::max(std::abs(solution.flows[i].from_mva),
                        std::abs(solution.flows[i].to_mva));
    out[i] = std::max(0.0, s - rating);
  }
  return out;
}

double dispatch_cost(const NetworkCase& c, const PowerFlowSolution& solution) {
  double total = 0.0;
  for (size_t g = 0; g < c.generators.size(); ++g) {
    const Generator& gen = c.generators[g];
    double p = solution.gen_p_mw[g];
    total += gen.cost_c0 + gen.cost_c1 * p + gen.cost_c2 * p * p;
  }
  return total;
}

}  // namespace gridstart
