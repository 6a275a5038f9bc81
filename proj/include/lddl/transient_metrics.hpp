#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lddl/network.hpp"
#include "lddl/simulator.hpp"

namespace lddl {

struct WindowConfig {
  double window = 1.0;  // Δt_w, s
  double weight = 1.0;  // w
  // Multiplies coupling terms. Unset: 1 / nominal LDDL demand of the bus
  // (1 when that demand is not positive).
  std::optional<double> coupling_scale;
};

void validate(const WindowConfig& cfg);

struct EnergyComponents {
  double local = 0.0;              // E^l
  double coupling = 0.0;           // E^c
  double local_directional = 0.0;  // E^ld
  double coupling_directional = 0.0;  // E^cd
};

/// Instantaneous energy-like flows at one bus. Coupling terms are unscaled.
EnergyComponents energy_components(double m_eq, double omega, double omega0,
                                   double theta_bus,
                                   std::span<const double> theta_neighbors,
                                   std::span<const double> b_list);

struct WindowedEnergy {
  std::vector<double> total;        // E
  std::vector<double> directional;  // E^d
};

/// Trailing-window sums over round(window/dt)+1 samples; 0 until the first
/// full window. Throws DomainError if window < dt.
WindowedEnergy windowed_energy(std::span<const double> local,
                               std::span<const double> coupling,
                               std::span<const double> local_directional,
                               std::span<const double> coupling_directional,
                               double window, double weight, double dt);

struct BusEnergySeries {
  int bus = 0;
  double m_eq = 0.0;
  double coupling_scale = 1.0;
  std::vector<int> neighbors;
  std::vector<double> local, coupling, local_directional,
      coupling_directional, total, directional;
};

struct EnergyFlowSeries {
  std::vector<double> time;
  WindowConfig config;
  std::vector<BusEnergySeries> buses;  // one per LDDL, in scenario order
};

/// Energy-flow analytics over a simulated trajectory. `nominal_load` holds
/// the nominal demand (p.u.) per LDDL. Throws DomainError if the trajectory
/// is shorter than one window or neighbor angles are missing.
EnergyFlowSeries analyze_transient(const SimulationResult& result,
                                   const GridModel& model,
                                   std::span<const double> nominal_load,
                                   const WindowConfig& cfg = {});

struct EnergySnapshot {
  double requested = 0.0;
  double time = 0.0;  // sample actually used: last one at or before request
  std::vector<int> buses;
  std::vector<double> directional;
};

std::vector<EnergySnapshot> take_snapshots(const EnergyFlowSeries& series,
                                           std::span<const double> times);

/// One CSV per bus (`energy_bus<id>.csv`). Returns the written paths.
std::vector<std::filesystem::path> write_energy_csv(
    const std::filesystem::path& dir, const EnergyFlowSeries& series);

nlohmann::json snapshots_to_json(std::span<const EnergySnapshot> snaps);

}  // namespace lddl
