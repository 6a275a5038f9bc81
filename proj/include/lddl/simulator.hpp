#pragma once

#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lddl/dae.hpp"
#include "lddl/error.hpp"
#include "lddl/devices.hpp"
#include "lddl/network.hpp"

namespace lddl {

/// All dynamic states plus the algebraic bus voltages at one instant.
/// `p` holds bus angles followed by bus voltage magnitudes.
struct SystemState {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd p;

  double theta(std::size_t bus) const {
    return p(static_cast<Eigen::Index>(bus));
  }
  double v(std::size_t bus) const {
    return p(static_cast<Eigen::Index>(p.size() / 2 + bus));
  }
};

enum class Integrator { rk4, heun };

struct Scenario {
  GridModel model;
  std::vector<LddlAttachment> lddl;
  double horizon = 10.0;     // s
  double dt = 1e-3;          // s
  double output_dt = 1e-2;   // s, multiple of dt
  Integrator integrator = Integrator::rk4;
  std::optional<int> reference_bus;
  std::uint64_t seed = 0;
};

/// Throws ConfigError naming the offending field.
void validate(const Scenario& scenario);

/// Per-LDDL demand in p.u. after unit conversion, fluctuation scaling and
/// gain; ready for zero-order-hold lookup.
std::vector<LoadProfile> effective_profiles(const Scenario& scenario);

struct Equilibrium {
  DaeSystem system;  // setpoints and SG EMFs adjusted to the equilibrium
  SystemState state;
  PowerFlowSolution power_flow;
  Eigen::VectorXd loads;
};

/// Equilibrium for fixed LDDL demand `loads` (one per entry of
/// `lddl_buses`). Runs a power flow with device buses as PV and the
/// reference at `reference_bus` (default: lowest-indexed generator bus),
/// then back-solves device internal states and setpoints.
Equilibrium equilibrium_at(const GridModel& model,
                           std::span<const int> lddl_buses,
                           std::span<const double> loads,
                           std::optional<int> reference_bus = std::nullopt,
                           const PowerFlowOptions& pf = {});

/// Equilibrium at the scenario's t = 0 demand.
Equilibrium initialize_equilibrium(const Scenario& scenario);

/// Thrown when the algebraic re-solve inside a step fails. Carries the last
/// consistent state.
class StepFailure : public Error {
 public:
  StepFailure(const std::string& what, SystemState last)
      : Error(what), last_(std::move(last)) {}
  const SystemState& last_state() const noexcept { return last_; }

 private:
  SystemState last_;
};

struct StepOptions {
  Integrator integrator = Integrator::rk4;
  double algebraic_tolerance = 1e-11;
  int max_newton_iterations = 25;
};

/// Partitioned explicit integrator: RK4 or Heun on x with a Newton solve of
/// g = 0 at every stage. LDDL demand is held constant across a step.
class Simulator {
 public:
  Simulator(DaeSystem system, std::vector<LoadProfile> demand,
            StepOptions options = {});

  const DaeSystem& system() const noexcept { return sys_; }
  Eigen::VectorXd loads_at(double t) const;

  /// Solves g(x, p, u, v) = 0 for p starting from `guess`.
  Eigen::VectorXd solve_algebraic(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& v,
                                  const Eigen::VectorXd& guess);

  /// Advances one step of size dt. Throws StepFailure.
  SystemState step(const SystemState& s, double dt);

 private:
  Eigen::VectorXd rate(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                       Eigen::VectorXd& p);

  DaeSystem sys_;
  std::vector<LoadProfile> demand_;
  StepOptions opt_;
  Eigen::VectorXd u_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  bool have_lu_ = false;
};

struct SimulationResult {
  double omega0 = 0.0;
  std::vector<int> bus_ids;
  std::vector<double> time;
  // Indexed [bus][sample]. Device buses report the device frequency,
  // passive buses the backward difference of the bus angle.
  std::vector<std::vector<double>> bus_omega;
  std::vector<std::vector<double>> bus_theta;
  std::vector<std::vector<double>> bus_v;
  // Indexed [lddl][sample]: inverter terminal injection and filtered demand.
  std::vector<int> lddl_buses;
  std::vector<std::vector<double>> lddl_p;
  std::vector<std::vector<double>> lddl_q;
  std::vector<std::vector<double>> lddl_demand;
  bool diverged = false;
  double divergence_time = std::numeric_limits<double>::quiet_NaN();
  std::string divergence_reason;
};

struct DivergenceLimits {
  double max_freq_deviation = 2.0 * std::numbers::pi * 5.0;  // rad/s
  double v_min = 0.2;
  double v_max = 2.0;
};

/// Integrates the scenario from equilibrium. Divergence ends the run early
/// with a partial result; initialization failures propagate.
SimulationResult run_scenario(const Scenario& scenario,
                              const DivergenceLimits& limits = {});

/// Windowed backward difference of a frequency series (Hz) in Hz/s. The
/// first `window` samples use the samples available so far.
std::vector<double> compute_rocof(std::span<const double> freq_hz, double dt,
                                  std::size_t window);

}  // namespace lddl
