#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace gridstart {

enum class BusKind { slack, pv, pq };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::pq;
  double v_min = 0.94;
  double v_max = 1.06;
  double shunt_g = 0.0;  // pu
  double shunt_b = 0.0;  // pu
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;           // pu
  double x = 0.0;           // pu
  double b_charging = 0.0;  // pu, total
  double rating_mva = 0.0;  // 0 = unlimited
};

struct Generator {
  int bus = 0;
  double p_min = 0.0, p_max = 0.0;  // MW
  double q_min = 0.0, q_max = 0.0;  // MVAr
  double cost_c0 = 0.0;             // $/h
  double cost_c1 = 0.0;             // $/MWh
  double cost_c2 = 0.0;             // $/MW^2 h
};

struct NetworkCase {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;

  int bus_index(int id) const;    // position in buses, -1 if absent
  int slack_index() const;        // bus index of the slack bus, -1 if absent
  int generator_at(int bus_id) const;  // generator index, -1 if none
};

struct AdmittanceMatrix {
  int n = 0;
  Eigen::MatrixXcd entries;
};

enum class Variant { non_congested, congested };

NetworkCase three_bus_case(Variant variant);

AdmittanceMatrix build_ybus(const NetworkCase& c);

std::vector<std::string> validate_case(const NetworkCase& c);

NetworkCase load_case(const std::string& path);
void save_case(const NetworkCase& c, const std::string& path);
std::string case_to_string(const NetworkCase& c);
NetworkCase case_from_string(const std::string& text);

}  // namespace gridstart
