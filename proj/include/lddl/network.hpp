#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lddl/devices.hpp"

namespace lddl {

enum class BusKind { device_attached, passive };

/// Shunt susceptance follows the capacitive-positive convention: a shunt
/// with b > 0 supplies b*V^2 of reactive power to the bus.
struct Bus {
  int id = 0;
  double shunt_g = 0.0;
  double shunt_b = 0.0;
  double load_p = 0.0;  // constant-power consumption
  double load_q = 0.0;
};

/// Lossless branch with series susceptance b > 0 (b = 1/x).
struct Line {
  int from = 0;
  int to = 0;
  double b = 0.0;
};

struct GridModel {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Device> devices;
  double base_mva = 100.0;
  double nominal_hz = 60.0;

  double omega0() const noexcept;
  /// Position of the bus with this id. Throws ModelError when absent.
  std::size_t bus_index(int id) const;
  BusKind kind(std::size_t bus_idx) const;
  /// Index into `devices` of the device at the bus, if any.
  std::optional<std::size_t> device_at(std::size_t bus_idx) const;
};

/// Nodal susceptance structure in CSR layout. Diagonal = shunt_b + sum of
/// incident line susceptances, off-diagonal = -b for connected pairs.
struct SusceptanceMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col;
  std::vector<double> val;
  std::vector<double> shunt_g;
  std::vector<double> shunt_b;

  double at(std::size_t i, std::size_t j) const noexcept;
  Eigen::MatrixXd dense() const;
};

SusceptanceMatrix build_admittance(const GridModel& model);

struct BusPowers {
  std::vector<double> p;
  std::vector<double> q;
};

/// Power each bus sends into its lines and shunts at the given voltages.
/// For a bus with net injection (P_e, Q_e) the balance is P_e = p, Q_e = q.
BusPowers network_injections(const SusceptanceMatrix& y,
                             std::span<const double> v,
                             std::span<const double> theta);
BusPowers network_injections(const GridModel& model, std::span<const double> v,
                             std::span<const double> theta);

/// d(p, q)/d(theta, v) as a dense 2n x 2n matrix; rows [p; q], columns
/// [theta; v].
Eigen::MatrixXd network_jacobian(const SusceptanceMatrix& y,
                                 std::span<const double> v,
                                 std::span<const double> theta);

enum class BusType { reference, pv, pq };

/// Specified net injection at a bus. `v` is the voltage setpoint for
/// reference and PV buses.
struct BusInjection {
  BusType type = BusType::pq;
  double p = 0.0;
  double q = 0.0;
  double v = 1.0;
};

struct PowerFlowOptions {
  double tolerance = 1e-8;
  int max_iterations = 50;
};

struct PowerFlowSolution {
  std::vector<double> v;
  std::vector<double> theta;
  double residual_norm = 0.0;
  int iterations = 0;
};

/// Newton-Raphson in polar form. The reference angle is pinned at zero.
/// Throws InfeasibleError on non-convergence, ModelError on bad inputs.
PowerFlowSolution solve_power_flow(
    const GridModel& model, std::span<const BusInjection> injections,
    const std::optional<PowerFlowSolution>& initial_guess = std::nullopt,
    const PowerFlowOptions& options = {});

struct Violation {
  std::string entity;
  std::string rule;
};

std::vector<Violation> validate_model(const GridModel& model);

}  // namespace lddl
