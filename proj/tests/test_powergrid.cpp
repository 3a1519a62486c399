#include "doctest.h"

#include <cmath>
#include <random>

#include "cosim/powergrid.hpp"
#include "oracles.hpp"

using namespace cosim;
using namespace cosim::grid;

namespace {

GridModel two_bus(double r, double x, double p, double q) {
  GridModel g;
  g.buses = {{"hv", 20.0}, {"lv", 0.4}};
  g.transformer = {"tr", "hv", "lv", 100.0, r, x};
  g.loads = {{"load", "lv", p, q}};
  return g;
}

GridModel feeder() {
  GridModel g;
  g.buses = {{"mv", 20.0}, {"lv0", 0.4}, {"lv1", 0.4}, {"lv2", 0.4}};
  g.transformer = {"trafo", "mv", "lv0", 630.0, 0.0025, 0.01};
  g.lines = {{"l1", "lv0", "lv1", 0.05, 0.02, 200.0}, {"l2", "lv1", "lv2", 0.04, 0.02, 150.0}};
  g.loads = {{"a", "lv1", 40.0, 10.0}, {"b", "lv2", 30.0, 5.0}};
  g.ders = {{"pv", "lv2", 10.0}};
  return g;
}

}  // namespace

TEST_SUITE("powergrid") {

TEST_CASE("no injections: flat voltages and zero flows") {
  auto g = feeder();
  for (auto& l : g.loads) l.p_kw = l.q_kvar = 0.0;
  g.ders.clear();
  const auto sol = solve_power_flow(g, {});
  REQUIRE(sol.converged);
  for (const auto& b : sol.buses) CHECK(b.vm_pu == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& l : sol.lines) {
    CHECK(l.p_kw == 0.0);
    CHECK(l.loading_percent == 0.0);
  }
  CHECK(sol.transformer.loading_percent == 0.0);
}

TEST_CASE("lossless branch carries exactly the load") {
  GridModel g;
  g.buses = {{"mv", 20.0}, {"lv0", 0.4}, {"lv1", 0.4}};
  g.transformer = {"tr", "mv", "lv0", 250.0, 0.0, 0.0};
  g.lines = {{"l1", "lv0", "lv1", 0.0, 0.0, 200.0}};
  g.loads = {{"a", "lv1", 100.0, 0.0}};
  const auto sol = solve_power_flow(g, {});
  REQUIRE(sol.converged);
  CHECK(sol.transformer.p_kw == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(sol.find_line("l1")->p_kw == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("two-bus case 0.1+j0.1 ohm, 50 kW matches the closed form") {
  auto g = two_bus(0.1, 0.1, 50.0, 0.0);
  const auto sol = solve_power_flow(g, {});
  REQUIRE(sol.converged);
  const double zb = oracle::z_base(0.4, 100.0);
  const double expect = oracle::two_bus_voltage(1.0, 0.5, 0.0, 0.1 / zb, 0.1 / zb);
  CHECK(std::abs(sol.find_bus("lv")->vm_pu - expect) < 1e-6);
}

TEST_CASE("two-bus analytic oracle over 50 random draws") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> rx(0.0005, 0.05), pq(0.0, 60.0);
  for (int i = 0; i < 50; ++i) {
    const double r = rx(rng), x = rx(rng), p = pq(rng), q = pq(rng) / 3.0;
    const auto sol = solve_power_flow(two_bus(r, x, p, q), {});
    REQUIRE(sol.converged);
    const double zb = oracle::z_base(0.4, 100.0);
    const double expect = oracle::two_bus_voltage(1.0, p / 100.0, q / 100.0, r / zb, x / zb);
    CHECK(std::abs(sol.find_bus("lv")->vm_pu - expect) < 1e-6);
  }
}

TEST_CASE("power balance holds on random radial grids of 2 to 20 buses") {
  std::mt19937_64 rng(77);
  for (std::size_t n = 2; n <= 20; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto g = oracle::random_radial_grid(n, rng);
      const auto sol = solve_power_flow(g, {});
      REQUIRE(sol.converged);
      CHECK(oracle::power_balance_mismatch(g, sol) < 1e-6);
    }
  }
}

TEST_CASE("transformer supplies load minus generation plus losses") {
  const auto g = feeder();
  const auto sol = solve_power_flow(g, {});
  REQUIRE(sol.converged);
  const double net_load = 40.0 + 30.0 - 10.0;
  CHECK(sol.transformer.p_kw > net_load);
  CHECK(sol.transformer.p_kw < net_load * 1.05);
  CHECK(oracle::power_balance_mismatch(g, sol) < 1e-6);
}

TEST_CASE("load scaling is applied per load") {
  const auto g = feeder();
  const std::vector<double> scale{0.5, 2.0};
  const auto sol = solve_power_flow(g, scale);
  REQUIRE(sol.converged);
  CHECK(oracle::power_balance_mismatch(g, sol, scale) < 1e-6);
  CHECK_THROWS(solve_power_flow(g, std::vector<double>{1.0}));
}

TEST_CASE("invalid grids are refused with every problem listed") {
  auto g = feeder();
  g.lines.push_back({"loop", "lv2", "lv0", 0.1, 0.1, 100.0});
  g.loads.push_back({"ghost", "nowhere", 1.0, 0.0});
  try {
    g.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("not radial") != std::string::npos);
    CHECK(what.find("nowhere") != std::string::npos);
  }
}

TEST_CASE("load profile is deterministic, bounded and periodic without noise") {
  LoadProfile p{5, 100, 0.08, 4};
  CHECK(p.sample(17) == p.sample(17));
  double lo = 10.0, hi = -10.0;
  LoadProfile wide{5, 300, 0.5, 4};
  for (std::uint64_t s = 0; s < 10'000; ++s) {
    for (double v : wide.sample(s)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  CHECK(lo >= LoadProfile::kMinScale);
  CHECK(hi <= LoadProfile::kMaxScale);

  LoadProfile quiet{5, 100, 0.0, 3};
  for (std::uint64_t s = 0; s < 250; ++s) CHECK(quiet.sample(s) == quiet.sample(s + 100));
}

TEST_CASE("measurements copy the bound quantities") {
  const auto g = feeder();
  const auto sol = solve_power_flow(g, {});
  RtuBinding b{"rtu1",
               {{"t_load", "trafo", Quantity::LoadingPercent},
                {"t_p", "trafo", Quantity::PKw},
                {"t_q", "trafo", Quantity::QKvar}}};
  validate_binding(g, b);
  const auto ms = measurements_for(b, sol, SimTime::at_step(3));
  REQUIRE(ms.size() == 3);
  CHECK(ms[0].value == sol.transformer.loading_percent);
  CHECK(ms[1].value == sol.transformer.p_kw);
  CHECK(ms[2].value == sol.transformer.q_kvar);
  CHECK(ms[1].at == SimTime::at_step(3));
  CHECK(measurements_for(RtuBinding{"empty", {}}, sol, SimTime{}).empty());

  RtuBinding volt{"rtu3", {{"v", "lv2", Quantity::VPu}}};
  CHECK(measurements_for(volt, sol, SimTime{})[0].value == sol.find_bus("lv2")->vm_pu);
}

TEST_CASE("bindings to unknown elements or impossible quantities are refused") {
  const auto g = feeder();
  CHECK_THROWS_AS(validate_binding(g, RtuBinding{"r", {{"p", "nope", Quantity::PKw}}}), ConfigError);
  CHECK_THROWS_AS(validate_binding(g, RtuBinding{"r", {{"p", "lv1", Quantity::PKw}}}), ConfigError);
}

}
