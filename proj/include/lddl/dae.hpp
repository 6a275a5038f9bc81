#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lddl/network.hpp"

namespace lddl {

enum class StateKind { delta, omega, v_err, e, p_l };

const char* to_string(StateKind k) noexcept;

struct StateLabel {
  std::size_t device = 0;
  int bus = 0;
  StateKind kind = StateKind::delta;
  bool inverter = false;
  bool data_center = false;  // inverter fronting an LDDL
};

/// Semi-explicit DAE of the grid:
///   x' = f(x, u, p, v),   0 = g(x, p, u, v)
/// x: device states (SG: delta, omega; GFM: delta, omega, V^e, E, P^L),
/// p: bus angles then bus voltage magnitudes,
/// u: one active-power setpoint per device (SG mechanical power, GFM P_set),
/// v: LDDL demand, one entry per attached data center.
/// g stacks per-bus active then reactive balance (device injection minus
/// constant-power load minus network export).
class DaeSystem {
 public:
  /// `lddl_buses` name the GFM buses carrying a data center, in input order.
  DaeSystem(GridModel model, std::vector<int> lddl_buses);

  const GridModel& model() const noexcept { return model_; }
  const SusceptanceMatrix& admittance() const noexcept { return y_; }
  std::span<const int> lddl_buses() const noexcept { return lddl_buses_; }

  std::size_t num_states() const noexcept { return labels_.size(); }
  std::size_t num_buses() const noexcept { return model_.buses.size(); }
  std::size_t num_algebraic() const noexcept { return 2 * num_buses(); }
  std::size_t num_inputs() const noexcept { return model_.devices.size(); }
  std::size_t num_loads() const noexcept { return lddl_buses_.size(); }

  std::span<const StateLabel> labels() const noexcept { return labels_; }
  std::size_t state_offset(std::size_t device) const { return offset_[device]; }
  std::size_t device_bus_index(std::size_t device) const {
    return dev_bus_[device];
  }
  /// Device index of the k-th LDDL.
  std::size_t lddl_device(std::size_t k) const { return lddl_dev_[k]; }

  /// Setpoints currently stored in the model.
  Eigen::VectorXd inputs() const;
  /// Replaces the stored setpoints.
  void set_inputs(const Eigen::VectorXd& u);

  /// Internal EMF magnitude and angle of a device under state x.
  double emf(std::size_t device, const Eigen::VectorXd& x) const;
  double angle(std::size_t device, const Eigen::VectorXd& x) const;

  /// Device active/reactive injection into its terminal bus.
  DevicePower device_power(std::size_t device, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& p) const;

  Eigen::VectorXd f(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& p, const Eigen::VectorXd& v) const;
  Eigen::VectorXd g(const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                    const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  /// Analytic dg/dp.
  Eigen::MatrixXd g_jacobian(const Eigen::VectorXd& x,
                             const Eigen::VectorXd& p) const;

 private:
  GridModel model_;
  SusceptanceMatrix y_;
  std::vector<int> lddl_buses_;
  std::vector<StateLabel> labels_;
  std::vector<std::size_t> offset_;
  std::vector<std::size_t> dev_bus_;
  std::vector<std::size_t> lddl_dev_;
  std::vector<std::ptrdiff_t> dev_lddl_;  // -1 when none
};

}  // namespace lddl
