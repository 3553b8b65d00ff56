#include "gridstart/network.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gridstart/textio.hpp"

namespace gridstart {

int NetworkCase::bus_index(int id) const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == id) return static_cast<int>(i);
  return -1;
}

int NetworkCase::slack_index() const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i].kind == BusKind::slack) return static_cast<int>(i);
  return -1;
}

int NetworkCase::generator_at(int bus_id) const {
  for (size_t i = 0; i < generators.size(); ++i)
    if (generators[i].bus == bus_id) return static_cast<int>(i);
  return -1;
}

NetworkCase three_bus_case(Variant variant) {
  NetworkCase c;
  c.base_mva = 100.0;
  c.buses = {
      {1, BusKind::slack, 0.94, 1.10, 0.0, 0.0},
      {2, BusKind::pv, 0.94, 1.10, 0.0, 0.0},
      {3, BusKind::pq, 0.92, 1.00, 0.0, 0.0},
  };
  c.branches = {
      {1, 2, 0.008, 0.024, 0.0, 0.0},
      {2, 3, 0.006, 0.018, 0.0, 0.0},
      {1, 3, 0.002, 0.060, 0.0,
       variant == Variant::congested ? 160.0 : 0.0},
  };
  c.generators = {
      {1, 0.0, 600.0, -600.0, 600.0, 0.0, 1.0, 0.01},
      {2, 0.0, 600.0, -300.0, 300.0, 0.0, 1.8, 0.01},
  };
  return c;
}

AdmittanceMatrix build_ybus(const NetworkCase& c) {
  const int n = static_cast<int>(c.buses.size());
  AdmittanceMatrix y;
  y.n = n;
  y.entries = Eigen::MatrixXcd::Zero(n, n);
  for (const Branch& br : c.branches) {
    if (br.r == 0.0 && br.x == 0.0)
      throw std::runtime_error("build_ybus: branch " + std::to_string(br.from_bus) +
                               "-" + std::to_string(br.to_bus) + " has zero impedance");
    const int i = c.bus_index(br.from_bus);
    const int j = c.bus_index(br.to_bus);
    const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> ysh(0.0, br.b_charging / 2.0);
    y.entries(i, j) -= ys;
    y.entries(j, i) -= ys;
    y.entries(i, i) += ys + ysh;
    y.entries(j, j) += ys + ysh;
  }
  for (int i = 0; i < n; ++i)
    y.entries(i, i) += std::complex<double>(c.buses[i].shunt_g, c.buses[i].shunt_b);
  return y;
}

std::vector<std::string> validate_case(const NetworkCase& c) {
  std::vector<std::string> v;
  std::set<int> ids;
  int slack_count = 0;
  for (const Bus& b : c.buses) {
    if (!ids.insert(b.id).second)
      v.push_back("duplicate bus id " + std::to_string(b.id));
    if (b.v_min > b.v_max)
      v.push_back("bus " + std::to_string(b.id) + ": v_min > v_max");
    if (b.kind == BusKind::slack) ++slack_count;
  }
  for (size_t i = 0; i < c.buses.size(); ++i)
    if (c.buses[i].id != static_cast<int>(i) + 1) {
      v.push_back("bus ids not dense from 1");
      break;
    }
  if (slack_count == 0) v.push_back("no slack bus");
  if (slack_count > 1) v.push_back("more than one slack bus");
  for (const Branch& br : c.branches) {
    std::string name =
        "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
    if (br.x == 0.0) v.push_back(name + ": x = 0");
    if (br.from_bus == br.to_bus) v.push_back(name + ": from = to");
    if (br.rating_mva < 0.0) v.push_back(name + ": negative rating");
    if (c.bus_index(br.from_bus) < 0)
      v.push_back(name + ": unknown bus " + std::to_string(br.from_bus));
    if (c.bus_index(br.to_bus) < 0)
      v.push_back(name + ": unknown bus " + std::to_string(br.to_bus));
  }
  bool slack_has_gen = false;
  for (size_t g = 0; g < c.generators.size(); ++g) {
    const Generator& gen = c.generators[g];
    std::string name = "generator " + std::to_string(g + 1);
    if (gen.p_min > gen.p_max) v.push_back(name + ": p_min > p_max");
    if (gen.q_min > gen.q_max) v.push_back(name + ": q_min > q_max");
    if (gen.cost_c2 < 0.0) v.push_back(name + ": cost_c2 < 0");
    int bi = c.bus_index(gen.bus);
    if (bi < 0)
      v.push_back(name + ": unknown bus " + std::to_string(gen.bus));
    else if (c.buses[bi].kind == BusKind::slack)
      slack_has_gen = true;
  }
  if (!slack_has_gen && slack_count >= 1)
    v.push_back("no generator on the slack bus");
  if (c.base_mva <= 0.0) v.push_back("base_mva must be positive");
  return v;
}

namespace {

std::string kind_name(BusKind k) {
  switch (k) {
    case BusKind::slack: return "slack";
    case BusKind::pv: return "pv";
    default: return "pq";
  }
}

BusKind kind_from(const std::string& s, const std::string& context) {
  if (s == "slack") return BusKind::slack;
  if (s == "pv") return BusKind::pv;
  if (s == "pq") return BusKind::pq;
  throw std::runtime_error(context + ": unknown bus kind '" + s + "'");
}

}  // namespace

std::string case_to_string(const NetworkCase& c) {
  std::ostringstream os;
  os << "[base_mva]\n" << format_double(c.base_mva) << "\n";
  os << "[buses]\n# id,kind,v_min,v_max,shunt_g,shunt_b\n";
  for (const Bus& b : c.buses)
    os << b.id << ',' << kind_name(b.kind) << ',' << format_double(b.v_min) << ','
       << format_double(b.v_max) << ',' << format_double(b.shunt_g) << ','
       << format_double(b.shunt_b) << "\n";
  os << "[branches]\n# from_bus,to_bus,r,x,b_charging,rating_mva\n";
  for (const Branch& br : c.branches)
    os << br.from_bus << ',' << br.to_bus << ',' << format_double(br.r) << ','
       << format_double(br.x) << ',' << format_double(br.b_charging) << ','
       << format_double(br.rating_mva) << "\n";
  os << "[generators]\n# bus,p_min,p_max,q_min,q_max,cost_c0,cost_c1,cost_c2\n";
  for (const Generator& g : c.generators)
    os << g.bus << ',' << format_double(g.p_min) << ',' << format_double(g.p_max)
       << ',' << format_double(g.q_min) << ',' << format_double(g.q_max) << ','
       << format_double(g.cost_c0) << ',' << format_double(g.cost_c1) << ','
       << format_double(g.cost_c2) << "\n";
  return os.str();
}

NetworkCase case_from_string(const std::string& text) {
  NetworkCase c;
  c.base_mva = 0.0;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string ctx = "line " + std::to_string(lineno);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error(ctx + ": malformed section header");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    auto f = split(line, ',');
    if (section == "base_mva") {
      c.base_mva = parse_double(f.at(0), ctx);
    } else if (section == "buses") {
      if (f.size() != 6)
        throw std::runtime_error(ctx + ": bus record needs 6 fields");
      Bus b;
      b.id = parse_int(f[0], ctx);
      b.kind = kind_from(f[1], ctx);
      b.v_min = parse_double(f[2], ctx);
      b.v_max = parse_double(f[3], ctx);
      b.shunt_g = parse_double(f[4], ctx);
      b.shunt_b = parse_double(f[5], ctx);
      c.buses.push_back(b);
    } else if (section == "branches") {
      if (f.size() != 6)
        throw std::runtime_error(ctx + ": branch record needs 6 fields");
      Branch br;
      br.from_bus = parse_int(f[0], ctx);
      br.to_bus = parse_int(f[1], ctx);
      br.r = parse_double(f[2], ctx);
      br.x = parse_double(f[3], ctx);
      br.b_charging = parse_double(f[4], ctx);
      br.rating_mva = parse_double(f[5], ctx);
      c.branches.push_back(br);
    } else if (section == "generators") {
      if (f.size() != 8)
        throw std::runtime_error(ctx + ": generator record needs 8 fields");
      Generator g;
      g.bus = parse_int(f[0], ctx);
      g.p_min = parse_double(f[1], ctx);
      g.p_max = parse_double(f[2], ctx);
      g.q_min = parse_double(f[3], ctx);
      g.q_max = parse_double(f[4], ctx);
      g.cost_c0 = parse_double(f[5], ctx);
      g.cost_c1 = parse_double(f[6], ctx);
      g.cost_c2 = parse_double(f[7], ctx);
      c.generators.push_back(g);
    } else {
      throw std::runtime_error(ctx + ": record outside a known section");
    }
  }
  auto violations = validate_case(c);
  if (!violations.empty())
    throw std::runtime_error("validation error: " + violations.front());
  return c;
}

NetworkCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open case file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return case_from_string(buf.str());
}

void save_case(const NetworkCase& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write case file: " + path);
  out << case_to_string(c);
}

}  // namespace gridstart
