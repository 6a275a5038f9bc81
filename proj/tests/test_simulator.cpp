#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lddl/error.hpp"
#include "lddl/model_io.hpp"
#include "lddl/scenario_io.hpp"
#include "lddl/simulator.hpp"

using namespace lddl;
namespace fs = std::filesystem;

namespace {

const fs::path kData = LDDL_DATA_DIR;

Scenario flat() {
  return load_scenario(kData / "scenarios/three_bus_flat.json").scenario;
}

// Runs the simulator from equilibrium at `d0` under constant demand `d1`.
Eigen::VectorXd endpoint(const Scenario& sc, double d0, double d1, double dt,
                         double horizon, Integrator integ) {
  const std::vector<int> buses{sc.lddl[0].bus};
  const std::vector<double> loads{d0};
  const auto eq = equilibrium_at(sc.model, buses, loads);
  StepOptions opt;
  opt.integrator = integ;
  opt.algebraic_tolerance = 1e-13;
  Simulator sim(eq.system, {constant_profile(d1, horizon + 1.0)}, opt);
  SystemState s = eq.state;
  const auto n = std::llround(horizon / dt);
  for (long long k = 0; k < n; ++k) s = sim.step(s, dt);
  return s.x;
}

}  // namespace

TEST_CASE("scenario validation") {
  auto check_field = [](Scenario sc, const char* field) {
    try {
      validate(sc);
      FAIL("expected ConfigError for " << field);
    } catch (const ConfigError& e) {
      CHECK(e.field().find(field) != std::string::npos);
    }
  };
  CHECK_NOTHROW(validate(flat()));
  auto a = flat();
  a.dt = 0.0;
  check_field(a, "dt");
  auto b = flat();
  b.output_dt = 0.0025;
  check_field(b, "output_dt");
  auto c = flat();
  c.horizon = 100.0;
  check_field(c, "profile");
  auto d = flat();
  d.lddl[0].fluctuation_scale = 0.0;
  check_field(d, "fluctuation_scale");
}

TEST_CASE("equilibrium initialization") {
  const auto sc = flat();
  const auto eq = initialize_equilibrium(sc);
  const auto& sys = eq.system;
  const Eigen::VectorXd f = sys.f(eq.state.x, sys.inputs(), eq.state.p, eq.loads);
  const Eigen::VectorXd g = sys.g(eq.state.x, eq.state.p, sys.inputs(), eq.loads);
  CHECK(f.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(g.cwiseAbs().maxCoeff() < 1e-9);
  const auto gfm = sys.lddl_device(0);
  CHECK(eq.state.x(sys.state_offset(gfm) + 4) == doctest::Approx(1.0));
  CHECK(eq.state.x(sys.state_offset(gfm) + 2) == 0.0);

  const std::vector<int> buses{2};
  const std::vector<double> heavy{60.0};
  CHECK_THROWS_AS(equilibrium_at(sc.model, buses, heavy), InfeasibleError);
}

TEST_CASE("two-bus equilibrium matches the sine transfer") {
  GridModel m;
  m.buses = {{1}, {2}};
  const double b = 8.0;
  m.lines = {{1, 2, b}};
  SynchronousGenerator sg;
  sg.bus = 1;
  GfmInverter inv;
  inv.bus = 2;
  inv.p_set = 0.9;
  m.devices = {sg, inv};
  const std::vector<int> buses{2};
  const std::vector<double> loads{0.3};
  const auto eq = equilibrium_at(m, buses, loads);
  const double transfer = inv.p_set - loads[0];
  CHECK(eq.state.theta(1) - eq.state.theta(0) ==
        doctest::Approx(std::asin(transfer / b)).epsilon(1e-9));
  CHECK(eq.state.v(0) == doctest::Approx(1.0));
  CHECK(eq.state.v(1) == doctest::Approx(1.0));
  const auto sg_p = eq.system.device_power(0, eq.state.x, eq.state.p);
  CHECK(sg_p.p == doctest::Approx(-transfer).epsilon(1e-9));
  CHECK(std::get<SynchronousGenerator>(eq.system.model().devices[0]).mech_power ==
        doctest::Approx(-transfer).epsilon(1e-9));
}

TEST_CASE("equilibrium is a fixed point of the step") {
  const auto sc = flat();
  const auto eq = initialize_equilibrium(sc);
  Simulator sim(eq.system, effective_profiles(sc));
  SystemState s = eq.state;
  for (int k = 0; k < 200; ++k) {
    const SystemState next = sim.step(s, sc.dt);
    CHECK((next.x - s.x).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(next.t == doctest::Approx(s.t + sc.dt));
    s = next;
  }
}

TEST_CASE("demand step lowers the inverter frequency") {
  const auto sc = flat();
  const std::vector<int> buses{2};
  const std::vector<double> loads{1.0};
  const auto eq = equilibrium_at(sc.model, buses, loads);
  Simulator sim(eq.system, {constant_profile(1.2, 5.0)});
  SystemState s = eq.state;
  for (int k = 0; k < 50; ++k) s = sim.step(s, 1e-3);
  const auto off = eq.system.state_offset(eq.system.lddl_device(0));
  CHECK(s.x(off + 1) < sc.model.omega0());
}

TEST_CASE("integrator self-convergence") {
  const auto sc = flat();
  for (const auto integ : {Integrator::rk4, Integrator::heun}) {
    const auto x20 = endpoint(sc, 1.0, 1.05, 0.02, 1.0, integ);
    const auto x10 = endpoint(sc, 1.0, 1.05, 0.01, 1.0, integ);
    const auto x05 = endpoint(sc, 1.0, 1.05, 0.005, 1.0, integ);
    const double ratio = (x20 - x10).norm() / (x10 - x05).norm();
    CAPTURE(ratio);
    if (integ == Integrator::heun) {
      CHECK(ratio > 3.0);
      CHECK(ratio < 5.0);
    } else {
      CHECK(ratio > 3.5);
    }
  }
}

TEST_CASE("uniform angle shift leaves frequency and voltage unchanged") {
  const auto sc = flat();
  const std::vector<int> buses{2};
  const std::vector<double> loads{1.0};
  const auto eq = equilibrium_at(sc.model, buses, loads);
  const auto& sys = eq.system;
  SystemState a = eq.state, b = eq.state;
  const double shift = 0.7;
  for (std::size_t i = 0; i < sys.num_states(); ++i)
    if (sys.labels()[i].kind == StateKind::delta) b.x(i) += shift;
  for (std::size_t i = 0; i < sys.num_buses(); ++i) b.p(i) += shift;
  Simulator sa(sys, {constant_profile(1.1, 5.0)}), sb(sys, {constant_profile(1.1, 5.0)});
  for (int k = 0; k < 1000; ++k) {
    a = sa.step(a, 1e-3);
    b = sb.step(b, 1e-3);
  }
  for (std::size_t i = 0; i < sys.num_states(); ++i) {
    if (sys.labels()[i].kind == StateKind::delta) continue;
    CHECK(a.x(i) == doctest::Approx(b.x(i)).epsilon(1e-9));
  }
  for (std::size_t i = 0; i < sys.num_buses(); ++i)
    CHECK(a.v(i) == doctest::Approx(b.v(i)).epsilon(1e-9));
}

TEST_CASE("equilibrium hold and determinism") {
  const auto sc = flat();
  const auto r1 = run_scenario(sc);
  const auto r2 = run_scenario(sc);
  CHECK(!r1.diverged);
  REQUIRE(r1.time.size() == 1001);
  CHECK(r1.time.back() == doctest::Approx(10.0));
  for (const auto& w : r1.bus_omega)
    for (double v : w) CHECK(std::abs(v - r1.omega0) / r1.omega0 < 1e-6);
  CHECK(r1.bus_omega == r2.bus_omega);
  CHECK(r1.bus_theta == r2.bus_theta);
  CHECK(r1.lddl_p == r2.lddl_p);
}

TEST_CASE("frequency response follows demand spikes") {
  auto sc = flat();
  sc.horizon = 10.0;
  LoadProfile p;
  const double spikes[] = {2.0, 5.0, 8.0};
  for (int k = 0; k <= 1000; ++k) {
    const double t = k * 0.01;
    double v = 1.0;
    for (double s : spikes)
      if (t >= s && t < s + 0.1) v = 1.3;
    p.t.push_back(t);
    p.value.push_back(v);
  }
  sc.lddl[0].profile = p;
  const auto r = run_scenario(sc);
  REQUIRE(!r.diverged);
  const auto& w = r.bus_omega[sc.model.bus_index(2)];
  for (double s : spikes) {
    std::size_t best = 0;
    double peak = -1.0;
    for (std::size_t k = 0; k < r.time.size(); ++k) {
      if (r.time[k] < s - 1.0 || r.time[k] > s + 2.0) continue;
      if (std::abs(w[k] - r.omega0) > peak) {
        peak = std::abs(w[k] - r.omega0);
        best = k;
      }
    }
    CHECK(r.time[best] >= s);
    CHECK(r.time[best] <= s + 1.0);
  }
}

TEST_CASE("amplified fluctuations diverge with a partial result") {
  const auto sc = load_scenario(kData / "scenarios/three_bus_collapse.json").scenario;
  const auto r = run_scenario(sc);
  CHECK(r.diverged);
  CHECK(r.divergence_time < sc.horizon);
  CHECK(!r.divergence_reason.empty());
  for (const auto& s : r.bus_omega) CHECK(s.size() == r.time.size());
  for (const auto& s : r.lddl_p) CHECK(s.size() == r.time.size());

  auto stable = sc;
  stable.lddl[0].fluctuation_scale = 1.0;
  CHECK(!run_scenario(stable).diverged);
}

TEST_CASE("rocof") {
  const double dt = 0.02;
  std::vector<double> ramp(300), flat_f(300, 60.0), sine(3000);
  for (std::size_t k = 0; k < ramp.size(); ++k) ramp[k] = 60.0 + 0.8 * k * dt;
  for (std::size_t w : {1, 4, 25}) {
    for (double r : compute_rocof(ramp, dt, w)) CHECK(r == doctest::Approx(0.8).epsilon(1e-9));
    for (double r : compute_rocof(flat_f, dt, w)) CHECK(r == 0.0);
  }
  const double a = 0.05, f = 0.5, h = 1e-3;
  for (std::size_t k = 0; k < sine.size(); ++k)
    sine[k] = 60.0 + a * std::sin(2 * std::numbers::pi * f * k * h);
  const auto d = compute_rocof(sine, h, 1);
  double peak = 0.0;
  for (double x : d) peak = std::max(peak, std::abs(x));
  CHECK(peak == doctest::Approx(2 * std::numbers::pi * f * a).epsilon(1e-3));

  CHECK_THROWS_AS(compute_rocof(ramp, dt, 0), DomainError);
  const std::vector<double> tiny{1.0, 2.0};
  CHECK_THROWS_AS(compute_rocof(tiny, dt, 5), DomainError);
}

TEST_CASE("scenario files") {
  const auto f = load_scenario(kData / "scenarios/three_bus_oscillatory.json");
  CHECK(f.profile_paths.size() == 1);
  CHECK(f.scenario.horizon == 30.0);
  CHECK(f.scenario.lddl[0].fluctuation_scale == 1.0);
  CHECK_THROWS_AS(load_scenario(kData / "scenarios/missing.json"), IoError);

  const auto bad_unit = nlohmann::json::parse(
      R"({"model": "../models/three_bus.json", "lddl": [{"bus": 2, "constant": 1, "unit": "MW"}],
          "horizon": 1, "dt": 0.001, "output_dt": 0.01})");
  CHECK_THROWS_AS(parse_scenario(bad_unit, kData / "scenarios"), ConfigError);
  auto missing_profile = bad_unit;
  missing_profile["lddl"][0] = {{"bus", 2}, {"profile", "nope.csv"}};
  CHECK_THROWS_AS(parse_scenario(missing_profile, kData / "scenarios"), IoError);
  auto heun = bad_unit;
  heun["lddl"][0]["unit"] = "pu";
  heun["integrator"] = "trapezoidal";
  CHECK(parse_scenario(heun, kData / "scenarios").scenario.integrator == Integrator::heun);
}
