#include "gridstart/slp.hpp"

#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>

#include "gridstart/textio.hpp"

namespace gridstart {

namespace {

constexpr double kMeritPenalty = 1e4;  // $ per pu of summed mismatch
constexpr double kStepPenalty = 1e-3;  // keeps the zero step uniquely optimal at a fixed point
constexpr double kMinRadius = 1e-10;
// Couples generator P/Q steps to the trust radius so proposals vanish as the radius
// shrinks; wide enough (1000 MW at the initial radius) to never bind a cold start.
constexpr double kPowerStepScale = 100.0;

Eigen::VectorXcd state_voltage(const IvState& st) {
  Eigen::VectorXcd v(st.e.size());
  for (int i = 0; i < st.e.size(); ++i) v(i) = std::complex<double>(st.e(i), st.f(i));
  return v;
}

void sync_currents(const NetworkCase& net, IvState& st) {
  AdmittanceMatrix y = build_ybus(net);
  Eigen::VectorXcd cur = y.entries * state_voltage(st);
  st.ir.resize(cur.size());
  st.ii.resize(cur.size());
  for (int i = 0; i < cur.size(); ++i) {
    st.ir(i) = cur(i).real();
    st.ii(i) = cur(i).imag();
  }
}

}  // namespace

IvState state_from_power_flow(const PowerFlowSolution& pf, const NetworkCase& net) {
  if (!pf.converged) throw std::invalid_argument("state_from_power_flow: solution not converged");
  IvState st;
  int nb = static_cast<int>(net.buses.size());
  st.e.resize(nb);
  st.f.resize(nb);
  for (int i = 0; i < nb; ++i) {
    st.e(i) = pf.v_mag_pu[i] * std::cos(pf.v_ang_rad[i]);
    st.f(i) = pf.v_mag_pu[i] * std::sin(pf.v_ang_rad[i]);
  }
  sync_currents(net, st);
  st.gen_p_mw = pf.gen_p_mw;
  st.gen_q_mvar = pf.gen_q_mvar;
  return st;
}

IvState flat_iv_start(const NetworkCase& net, const LoadScenario& load) {
  IvState st;
  int nb = static_cast<int>(net.buses.size());
  st.e = Eigen::VectorXd::Ones(nb);
  st.f = Eigen::VectorXd::Zero(nb);
  sync_currents(net, st);
  double total = 0.0;
  for (double p : load.p_mw) total += p;
  double cap = 0.0;
  for (const auto& g : net.generators) cap += g.p_max;
  st.gen_p_mw.resize(net.generators.size());
  st.gen_q_mvar.assign(net.generators.size(), 0.0);
  for (size_t g = 0; g < net.generators.size(); ++g)
    st.gen_p_mw[g] = cap > 0.0 ? total * net.generators[g].p_max / cap : 0.0;
  return st;
}

void bilinear_injections(const IvState& st, Eigen::VectorXd& p_pu, Eigen::VectorXd& q_pu) {
  int nb = static_cast<int>(st.e.size());
  p_pu.resize(nb);
  q_pu.resize(nb);
  for (int i = 0; i < nb; ++i) {
    p_pu(i) = st.e(i) * st.ir(i) + st.f(i) * st.ii(i);
    q_pu(i) = st.f(i) * st.ir(i) - st.e(i) * st.ii(i);
  }
}

void state_mismatch(const NetworkCase& net, const LoadScenario& load, const IvState& st,
                    double& sum_out, double& max_out) {
  Eigen::VectorXd p, q;
  bilinear_injections(st, p, q);
  int nb = static_cast<int>(net.buses.size());
  Eigen::VectorXd tp = Eigen::VectorXd::Zero(nb), tq = Eigen::VectorXd::Zero(nb);
  for (size_t g = 0; g < net.generators.size(); ++g) {
    int bi = net.bus_index(net.generators[g].bus);
    tp(bi) += st.gen_p_mw[g] / net.base_mva;
    tq(bi) += st.gen_q_mvar[g] / net.base_mva;
  }
  for (int i = 0; i < nb; ++i) {
    tp(i) -= load.p_mw[i] / net.base_mva;
    tq(i) -= load.q_mvar[i] / net.base_mva;
  }
  sum_out = 0.0;
  max_out = 0.0;
  for (int i = 0; i < nb; ++i) {
    double dp = std::abs(p(i) - tp(i));
    double dq = std::abs(q(i) - tq(i));
    sum_out += dp + dq;
    max_out = std::max(max_out, std::max(dp, dq));
  }
}

double state_cost(const NetworkCase& net, const IvState& st) {
  double cost = 0.0;
  for (size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    double p = st.gen_p_mw[g];
    cost += gen.cost_c0 + gen.cost_c1 * p + gen.cost_c2 * p * p;
  }
  return cost;
}

void state_violation(const NetworkCase& net, const IvState& st, double& sum_out, double& max_out) {
  sum_out = 0.0;
  max_out = 0.0;
  auto take = [&](double v) {
    if (v > 0.0) {
      sum_out += v;
      max_out = std::max(max_out, v);
    }
  };
  for (size_t i = 0; i < net.buses.size(); ++i) {
    double vm = std::hypot(st.e(i), st.f(i));
    take(vm - net.buses[i].v_max);
    take(net.buses[i].v_min - vm);
  }
  // The rotated octagon's binding facet normal follows the current phasor, so
  // the worst facet overshoot is |I| - cap exactly.
  for (const auto& br : net.branches) {
    if (br.rating_mva <= 0.0) continue;
    int fb = net.bus_index(br.from_bus);
    int tb = net.bus_index(br.to_bus);
    std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    std::complex<double> ysh(0.0, br.b_charging / 2.0);
    for (int side = 0; side < 2; ++side) {
      int own = side == 0 ? fb : tb;
      int other = side == 0 ? tb : fb;
      std::complex<double> v_own(st.e(own), st.f(own));
      std::complex<double> v_oth(st.e(other), st.f(other));
      std::complex<double> i0 = (ys + ysh) * v_own - ys * v_oth;
      double vmag = std::max(std::abs(v_own), 0.5);
      take(std::abs(i0) - br.rating_mva / net.base_mva / vmag);
    }
  }
}

SlpLp linearize_iv(const NetworkCase& net, const LoadScenario& load, const IvState& st,
                   double radius) {
  const int nb = static_cast<int>(net.buses.size());
  const int ng = static_cast<int>(net.generators.size());
  const int slack = net.slack_index();
  const double base = net.base_mva;
  AdmittanceMatrix y = build_ybus(net);

  SlpLp s;
  LpProblem& lp = s.lp;
  s.de_p.resize(nb);
  s.de_m.resize(nb);
  s.df_p.resize(nb);
  s.df_m.resize(nb);
  s.dir.resize(nb);
  s.dii.resize(nb);
  for (int i = 0; i < nb; ++i) {
    std::string tag = std::to_string(net.buses[i].id);
    double fr = (i == slack) ? 0.0 : radius;  // slack angle reference: f stays 0
    s.de_p[i] = lp.add_var("dep" + tag, 0.0, radius, kStepPenalty);
    s.de_m[i] = lp.add_var("dem" + tag, 0.0, radius, kStepPenalty);
    s.df_p[i] = lp.add_var("dfp" + tag, 0.0, fr, kStepPenalty);
    s.df_m[i] = lp.add_var("dfm" + tag, 0.0, fr, kStepPenalty);
    s.dir[i] = lp.add_var("dir" + tag, -kInf, kInf, 0.0);
    s.dii[i] = lp.add_var("dii" + tag, -kInf, kInf, 0.0);
  }
  s.dp_p.resize(ng);
  s.dp_m.resize(ng);
  s.dq_p.resize(ng);
  s.dq_m.resize(ng);
  for (int g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    std::string tag = std::to_string(gen.bus);
    double slope = gen.cost_c1 + 2.0 * gen.cost_c2 * st.gen_p_mw[g];
    double step_cap = kPowerStepScale * radius * net.base_mva;
    double up_room = std::max(0.0, gen.p_max - st.gen_p_mw[g]);
    double dn_room = std::max(0.0, st.gen_p_mw[g] - gen.p_min);
    s.dp_p[g] = lp.add_var("dpp" + tag, 0.0, std::min(up_room, step_cap), slope + kStepPenalty);
    s.dp_m[g] = lp.add_var("dpm" + tag, 0.0, std::min(dn_room, step_cap), -slope + kStepPenalty);
    double qup = std::max(0.0, gen.q_max - st.gen_q_mvar[g]);
    double qdn = std::max(0.0, st.gen_q_mvar[g] - gen.q_min);
    s.dq_p[g] = lp.add_var("dqp" + tag, 0.0, std::min(qup, step_cap), kStepPenalty);
    s.dq_m[g] = lp.add_var("dqm" + tag, 0.0, std::min(qdn, step_cap), kStepPenalty);
  }

  // (a) exact current definition: (I0 + dI) = Y (V0 + dV)
  for (int i = 0; i < nb; ++i) {
    std::string tag = std::to_string(net.buses[i].id);
    std::vector<std::pair<int, double>> rr{{s.dir[i], 1.0}};
    std::vector<std::pair<int, double>> ri{{s.dii[i], 1.0}};
    double rhs_r = -st.ir(i), rhs_i = -st.ii(i);
    for (int j = 0; j < nb; ++j) {
      double gij = y.entries(i, j).real();
      double bij = y.entries(i, j).imag();
      if (gij != 0.0) {
        rr.emplace_back(s.de_p[j], -gij);
        rr.emplace_back(s.de_m[j], gij);
        ri.emplace_back(s.df_p[j], -gij);
        ri.emplace_back(s.df_m[j], gij);
      }
      if (bij != 0.0) {
        rr.emplace_back(s.df_p[j], bij);
        rr.emplace_back(s.df_m[j], -bij);
        ri.emplace_back(s.de_p[j], -bij);
        ri.emplace_back(s.de_m[j], bij);
      }
      rhs_r += gij * st.e(j) - bij * st.f(j);
      rhs_i += gij * st.f(j) + bij * st.e(j);
    }
    lp.add_row(RowSense::eq, rhs_r, rr, "cur_r" + tag);
    lp.add_row(RowSense::eq, rhs_i, ri, "cur_i" + tag);
  }

  // (b) first-order Taylor of the bilinear nodal power balance
  std::vector<double> gen_p_bus(nb, 0.0), gen_q_bus(nb, 0.0);
  for (int g = 0; g < ng; ++g) {
    int bi = net.bus_index(net.generators[g].bus);
    gen_p_bus[bi] += st.gen_p_mw[g];
    gen_q_bus[bi] += st.gen_q_mvar[g];
  }
  for (int i = 0; i < nb; ++i) {
    std::string tag = std::to_string(net.buses[i].id);
    std::vector<std::pair<int, double>> rp{
        {s.dir[i], st.e(i)}, {s.de_p[i], st.ir(i)}, {s.de_m[i], -st.ir(i)},
        {s.dii[i], st.f(i)}, {s.df_p[i], st.ii(i)}, {s.df_m[i], -st.ii(i)}};
    std::vector<std::pair<int, double>> rq{
        {s.dir[i], st.f(i)},  {s.df_p[i], st.ir(i)},  {s.df_m[i], -st.ir(i)},
        {s.dii[i], -st.e(i)}, {s.de_p[i], -st.ii(i)}, {s.de_m[i], st.ii(i)}};
    for (int g = 0; g < ng; ++g) {
      if (net.bus_index(net.generators[g].bus) != i) continue;
      rp.emplace_back(s.dp_p[g], -1.0 / base);
      rp.emplace_back(s.dp_m[g], 1.0 / base);
      rq.emplace_back(s.dq_p[g], -1.0 / base);
      rq.emplace_back(s.dq_m[g], 1.0 / base);
    }
    double p0 = st.e(i) * st.ir(i) + st.f(i) * st.ii(i);
    double q0 = st.f(i) * st.ir(i) - st.e(i) * st.ii(i);
    double rhs_p = (gen_p_bus[i] - load.p_mw[i]) / base - p0;
    double rhs_q = (gen_q_bus[i] - load.q_mvar[i]) / base - q0;
    lp.add_row(RowSense::eq, rhs_p, rp, "bal_p" + tag);
    lp.add_row(RowSense::eq, rhs_q, rq, "bal_q" + tag);
  }

  // (c) voltage box: tangent plane for the upper bound, supporting halfplane
  // along the current phasor direction for the nonconvex lower bound
  for (int i = 0; i < nb; ++i) {
    const Bus& bus = net.buses[i];
    std::string tag = std::to_string(bus.id);
    double v2 = st.e(i) * st.e(i) + st.f(i) * st.f(i);
    double v0 = std::sqrt(v2);
    std::vector<std::pair<int, double>> hv{{s.de_p[i], 2.0 * st.e(i)},
                                           {s.de_m[i], -2.0 * st.e(i)},
                                           {s.df_p[i], 2.0 * st.f(i)},
                                           {s.df_m[i], -2.0 * st.f(i)}};
    lp.add_row(RowSense::le, bus.v_max * bus.v_max - v2, hv, "vmax" + tag);
    std::vector<std::pair<int, double>> lv{{s.de_p[i], st.e(i) / v0},
                                           {s.de_m[i], -st.e(i) / v0},
                                           {s.df_p[i], st.f(i) / v0},
                                           {s.df_m[i], -st.f(i) / v0}};
    lp.add_row(RowSense::ge, bus.v_min - v0, lv, "vmin" + tag);
  }

  // (d) octagon current limits per rated branch side.  |S| <= rating becomes
  // |I| <= rating / |V0| at that side; facets are rotated so one normal
  // follows the present current phasor, making the binding facet exact at
  // convergence.
  for (size_t k = 0; k < net.branches.size(); ++k) {
    const Branch& br = net.branches[k];
    if (br.rating_mva <= 0.0) continue;
    int fb = net.bus_index(br.from_bus);
    int tb = net.bus_index(br.to_bus);
    std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    std::complex<double> ysh(0.0, br.b_charging / 2.0);
    for (int side = 0; side < 2; ++side) {
      int own = side == 0 ? fb : tb;
      int other = side == 0 ? tb : fb;
      std::complex<double> ca = ys + ysh;  // coefficient on the own-side voltage
      std::complex<double> cb = -ys;
      std::complex<double> v_own(st.e(own), st.f(own));
      std::complex<double> v_oth(st.e(other), st.f(other));
      std::complex<double> i0 = ca * v_own + cb * v_oth;
      double vmag = std::max(std::abs(v_own), 0.5);
      double cap = br.rating_mva / net.base_mva / vmag;
      double phi0 = (std::abs(i0) > 1e-9) ? std::atan2(i0.imag(), i0.real()) : 0.0;
      std::string tag = "oct" + std::to_string(br.from_bus) + "_" + std::to_string(br.to_bus) +
                        (side == 0 ? "f" : "t");
      for (int face = 0; face < 8; ++face) {
        double ang = phi0 + face * (M_PI / 4.0);
        double nr = std::cos(ang), ni = std::sin(ang);
        // n . I linearized over dV of both endpoints
        double ce = nr * ca.real() + ni * ca.imag();   // d(n.I)/d e_own
        double cf = -nr * ca.imag() + ni * ca.real();  // d(n.I)/d f_own
        double de = nr * cb.real() + ni * cb.imag();
        double df = -nr * cb.imag() + ni * cb.real();
        std::vector<std::pair<int, double>> row{
            {s.de_p[own], ce},   {s.de_m[own], -ce},   {s.df_p[own], cf},   {s.df_m[own], -cf},
            {s.de_p[other], de}, {s.de_m[other], -de}, {s.df_p[other], df}, {s.df_m[other], -df}};
        double rhs = cap - (nr * i0.real() + ni * i0.imag());
        lp.add_row(RowSense::le, rhs, row, tag + std::to_string(face));
      }
    }
  }

  return s;
}

namespace {

struct StepInfo {
  IvState cand;
  double step_norm = 0.0;
};

StepInfo apply_step(const NetworkCase& net, const IvState& st, const SlpLp& s,
                    const LpSolution& ls) {
  StepInfo out;
  out.cand = st;
  int nb = static_cast<int>(st.e.size());
  for (int i = 0; i < nb; ++i) {
    double de = ls.x(s.de_p[i]) - ls.x(s.de_m[i]);
    double df = ls.x(s.df_p[i]) - ls.x(s.df_m[i]);
    out.cand.e(i) += de;
    out.cand.f(i) += df;
    out.cand.ir(i) += ls.x(s.dir[i]);
    out.cand.ii(i) += ls.x(s.dii[i]);
    out.step_norm = std::max(out.step_norm, std::max(std::abs(de), std::abs(df)));
  }
  for (size_t g = 0; g < net.generators.size(); ++g) {
    const Generator& gen = net.generators[g];
    double dp = ls.x(s.dp_p[g]) - ls.x(s.dp_m[g]);
    double dq = ls.x(s.dq_p[g]) - ls.x(s.dq_m[g]);
    out.cand.gen_p_mw[g] = std::min(gen.p_max, std::max(gen.p_min, st.gen_p_mw[g] + dp));
    out.cand.gen_q_mvar[g] = std::min(gen.q_max, std::max(gen.q_min, st.gen_q_mvar[g] + dq));
  }
  return out;
}

}  // namespace

SlpResult slp_solve(const NetworkCase& net, const LoadScenario& load, const IvState& init,
                    const SlpOptions& options) {
  SlpResult res;
  res.state = init;
  sync_currents(net, res.state);

  double radius = options.trust_radius_initial;
  double cur_sum, cur_max, vio_sum, vio_max;
  state_mismatch(net, load, res.state, cur_sum, cur_max);
  if (!std::isfinite(cur_sum)) throw std::invalid_argument("slp_solve: initial mismatch not finite");
  state_violation(net, res.state, vio_sum, vio_max);
  cur_sum += vio_sum;
  cur_max = std::max(cur_max, vio_max);
  double cur_cost = state_cost(net, res.state);
  double cur_merit = cur_cost + kMeritPenalty * cur_sum;

  for (int it = 1; it <= options.max_iterations; ++it) {
    SlpLp sl = linearize_iv(net, load, res.state, radius);
    LpSolution ls = solve_lp(sl.lp);
    res.iterations = it;

    SlpTraceRow row;
    row.iteration = it;
    row.radius = radius;

    if (ls.status != LpStatus::optimal) {
      row.objective = cur_cost;
      row.max_mismatch = cur_max;
      row.merit = cur_merit;
      res.trace.push_back(row);
      radius *= options.shrink;
      if (radius < kMinRadius) break;
      continue;
    }

    StepInfo step = apply_step(net, res.state, sl, ls);
    row.step_norm = step.step_norm;

    if (step.step_norm < options.step_tolerance && cur_max < options.mismatch_tolerance) {
      res.converged = true;
      row.objective = cur_cost;
      row.max_mismatch = cur_max;
      row.merit = cur_merit;
      res.trace.push_back(row);
      break;
    }

    double cand_sum, cand_max;
    state_mismatch(net, load, step.cand, cand_sum, cand_max);
    state_violation(net, step.cand, vio_sum, vio_max);
    cand_sum += vio_sum;
    cand_max = std::max(cand_max, vio_max);
    double cand_cost = state_cost(net, step.cand);
    double cand_merit = cand_cost + kMeritPenalty * cand_sum;

    if (cand_merit < cur_merit) {
      res.state = step.cand;
      cur_sum = cand_sum;
      cur_max = cand_max;
      cur_cost = cand_cost;
      cur_merit = cand_merit;
      radius *= options.expand;
      row.accepted = true;
    } else {
      radius *= options.shrink;
    }
    row.objective = cur_cost;
    row.max_mismatch = cur_max;
    row.merit = cur_merit;
    res.trace.push_back(row);
    if (radius < kMinRadius) break;
  }

  res.objective = cur_cost;
  return res;
}

std::string trace_to_csv(const std::vector<SlpTraceRow>& trace) {
  std::ostringstream os;
  os << "iteration,radius,step_norm,objective,mismatch\n";
  for (const auto& r : trace) {
    os << r.iteration << "," << format_double(r.radius) << "," << format_double(r.step_norm)
       << "," << format_double(r.objective) << "," << format_double(r.max_mismatch) << "\n";
  }
  return os.str();
}

}  // namespace gridstart
