#include <complex>
#include <cstdio>
#include <string>

#include "doctest.h"
#include "gridstart/network.hpp"

using namespace gridstart;
using cd = std::complex<double>;

namespace {

// Independent series admittance: conj(z) / |z|^2.
cd series_admittance(double r, double x) {
  const double d = r * r + x * x;
  return {r / d, -x / d};
}

}  // namespace

TEST_CASE("three-bus case layout") {
  for (Variant v : {Variant::non_congested, Variant::congested}) {
    const NetworkCase c = three_bus_case(v);
    CHECK(c.buses.size() == 3);
    CHECK(c.branches.size() == 3);
    CHECK(c.generators.size() == 2);
    CHECK(c.base_mva == 100.0);
    CHECK(c.slack_index() == 0);
    CHECK(c.buses[0].kind == BusKind::slack);
    CHECK(c.buses[1].kind == BusKind::pv);
    CHECK(c.buses[2].kind == BusKind::pq);
    CHECK(c.generator_at(1) == 0);
    CHECK(c.generator_at(2) == 1);
    CHECK(c.generator_at(3) == -1);
    CHECK(validate_case(c).empty());
  }
  CHECK(three_bus_case(Variant::non_congested).branches[2].rating_mva == 0.0);
  CHECK(three_bus_case(Variant::congested).branches[2].rating_mva == 160.0);
}

TEST_CASE("ybus off-diagonals are minus the series admittance") {
  const NetworkCase c = three_bus_case(Variant::non_congested);
  const AdmittanceMatrix y = build_ybus(c);
  REQUIRE(y.n == 3);

  for (const Branch& br : c.branches) {
    const int i = c.bus_index(br.from_bus);
    const int j = c.bus_index(br.to_bus);
    const cd ys = series_admittance(br.r, br.x);
    CHECK(std::abs(y.entries(i, j) + ys) < 1e-9);
    CHECK(std::abs(y.entries(j, i) + ys) < 1e-9);
  }

  // Branch 1-2 admittance worked by hand: 1/(0.008 + j0.024) = 12.5 - j37.5.
  const cd y12 = series_admittance(0.008, 0.024);
  CHECK(y12.real() == doctest::Approx(12.5).epsilon(1e-12));
  CHECK(y12.imag() == doctest::Approx(-37.5).epsilon(1e-12));
  CHECK(std::abs(y.entries(0, 1) - cd(-12.5, 37.5)) < 1e-9);
}

TEST_CASE("ybus diagonal sums incident admittances") {
  const NetworkCase c = three_bus_case(Variant::congested);
  const AdmittanceMatrix y = build_ybus(c);
  for (int i = 0; i < 3; ++i) {
    cd expect{0.0, 0.0};
    for (const Branch& br : c.branches) {
      if (c.bus_index(br.from_bus) == i || c.bus_index(br.to_bus) == i)
        expect += series_admittance(br.r, br.x) + cd(0.0, br.b_charging / 2.0);
    }
    CHECK(std::abs(y.entries(i, i) - expect) < 1e-9);
  }
  // No shunts anywhere, so every row sums to zero.
  for (int i = 0; i < 3; ++i) {
    cd row{0.0, 0.0};
    for (int j = 0; j < 3; ++j) row += y.entries(i, j);
    CHECK(std::abs(row) < 1e-9);
  }
  CHECK((y.entries - y.entries.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ybus rejects zero-impedance branches") {
  NetworkCase c = three_bus_case(Variant::non_congested);
  c.branches[0].r = 0.0;
  c.branches[0].x = 0.0;
  CHECK_THROWS(build_ybus(c));
}

TEST_CASE("validate_case flags broken cases") {
  NetworkCase c = three_bus_case(Variant::non_congested);
  c.buses[0].kind = BusKind::pv;  // no slack left
  CHECK(!validate_case(c).empty());

  c = three_bus_case(Variant::non_congested);
  c.generators[0].p_min = 10.0;
  c.generators[0].p_max = 5.0;
  CHECK(!validate_case(c).empty());

  c = three_bus_case(Variant::non_congested);
  c.branches[0].to_bus = 99;
  CHECK(!validate_case(c).empty());

  c = three_bus_case(Variant::non_congested);
  c.buses[1].v_min = 1.2;
  CHECK(!validate_case(c).empty());
}

TEST_CASE("case text round-trip is exact") {
  for (Variant v : {Variant::non_congested, Variant::congested}) {
    const NetworkCase a = three_bus_case(v);
    const std::string text = case_to_string(a);
    const NetworkCase b = case_from_string(text);
    CHECK(case_to_string(b) == text);
    CHECK(b.buses.size() == a.buses.size());
    for (std::size_t i = 0; i < a.buses.size(); ++i) {
      CHECK(b.buses[i].id == a.buses[i].id);
      CHECK(b.buses[i].v_min == a.buses[i].v_min);
      CHECK(b.buses[i].v_max == a.buses[i].v_max);
    }
    for (std::size_t i = 0; i < a.branches.size(); ++i) {
      CHECK(b.branches[i].r == a.branches[i].r);
      CHECK(b.branches[i].x == a.branches[i].x);
      CHECK(b.branches[i].rating_mva == a.branches[i].rating_mva);
    }
    for (std::size_t i = 0; i < a.generators.size(); ++i) {
      CHECK(b.generators[i].cost_c1 == a.generators[i].cost_c1);
      CHECK(b.generators[i].cost_c2 == a.generators[i].cost_c2);
      CHECK(b.generators[i].q_max == a.generators[i].q_max);
    }
  }
}

TEST_CASE("case file save/load") {
  const NetworkCase a = three_bus_case(Variant::congested);
  const std::string path = "test_case_roundtrip.txt";
  save_case(a, path);
  const NetworkCase b = load_case(path);
  CHECK(case_to_string(a) == case_to_string(b));
  std::remove(path.c_str());
}
