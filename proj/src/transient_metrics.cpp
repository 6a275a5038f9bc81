#include "lddl/transient_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "lddl/csv.hpp"
#include "lddl/error.hpp"
#include "lddl/kernels.hpp"

namespace lddl {

void validate(const WindowConfig& cfg) {
  if (!(cfg.window > 0.0) || !std::isfinite(cfg.window)) {
    throw ConfigError("window", "must be positive");
  }
  if (!(cfg.weight >= 0.0) || !std::isfinite(cfg.weight)) {
    throw ConfigError("weight", "must be non-negative");
  }
  if (cfg.coupling_scale &&
      (!(*cfg.coupling_scale >= 0.0) || !std::isfinite(*cfg.coupling_scale))) {
    throw ConfigError("coupling_scale", "must be non-negative");
  }
}

EnergyComponents energy_components(double m_eq, double omega, double omega0,
                                   double theta_bus,
                                   std::span<const double> theta_neighbors,
                                   std::span<const double> b_list) {
  if (theta_neighbors.size() != b_list.size()) {
    throw DomainError("neighbor angles and susceptances differ in length");
  }
  EnergyComponents c;
  const double dw = omega - omega0;
  const double half_m = 0.5 * m_eq;
  c.local = (half_m * dw) * dw;
  c.local_directional = (half_m * std::abs(dw)) * dw;
  for (std::size_t j = 0; j < b_list.size(); ++j) {
    const double d = theta_bus - theta_neighbors[j];
    const double half_b = 0.5 * b_list[j];
    c.coupling += (half_b * d) * d;
    c.coupling_directional += (half_b * std::abs(d)) * d;
  }
  return c;
}

namespace {

std::size_t window_samples(double window, double dt) {
  if (!(dt > 0.0)) throw DomainError("sample spacing must be positive");
  if (window < dt * (1.0 - 1e-9)) {
    throw DomainError("window shorter than the sample spacing");
  }
  return static_cast<std::size_t>(std::llround(window / dt)) + 1;
}

}  // namespace

WindowedEnergy windowed_energy(std::span<const double> local,
                               std::span<const double> coupling,
                               std::span<const double> local_directional,
                               std::span<const double> coupling_directional,
                               double window, double weight, double dt) {
  const std::size_t n = local.size();
  if (coupling.size() != n || local_directional.size() != n ||
      coupling_directional.size() != n) {
    throw DomainError("energy component series differ in length");
  }
  const std::size_t len = window_samples(window, dt);
  WindowedEnergy out;
  out.total.resize(n);
  out.directional.resize(n);
  kernels::window_sum(local.data(), coupling.data(), weight, len,
                      out.total.data(), n);
  kernels::window_sum(local_directional.data(), coupling_directional.data(),
                      weight, len, out.directional.data(), n);
  return out;
}

EnergyFlowSeries analyze_transient(const SimulationResult& result,
                                   const GridModel& model,
                                   std::span<const double> nominal_load,
                                   const WindowConfig& cfg) {
  validate(cfg);
  if (nominal_load.size() != result.lddl_buses.size()) {
    throw DomainError("one nominal load per LDDL bus required");
  }
  const std::size_t n = result.time.size();
  if (n < 2) throw DomainError("trajectory too short");
  const double dt = result.time[1] - result.time[0];
  const std::size_t len = window_samples(cfg.window, dt);
  if (len > n) throw DomainError("window longer than the trajectory");

  auto result_row = [&](int bus) -> std::size_t {
    const auto it = std::find(result.bus_ids.begin(), result.bus_ids.end(), bus);
    if (it == result.bus_ids.end()) {
      throw DomainError("no angle data for bus " + std::to_string(bus));
    }
    const auto row = static_cast<std::size_t>(it - result.bus_ids.begin());
    if (result.bus_theta[row].size() != n || result.bus_omega[row].size() != n) {
      throw DomainError("incomplete series for bus " + std::to_string(bus));
    }
    return row;
  };

  EnergyFlowSeries out;
  out.time = result.time;
  out.config = cfg;
  for (std::size_t l = 0; l < result.lddl_buses.size(); ++l) {
    const int bus = result.lddl_buses[l];
    const auto dev = model.device_at(model.bus_index(bus));
    if (!dev || !std::holds_alternative<GfmInverter>(model.devices[*dev])) {
      throw ModelError("LDDL bus " + std::to_string(bus) + " has no inverter");
    }
    const auto& inv = std::get<GfmInverter>(model.devices[*dev]);

    BusEnergySeries s;
    s.bus = bus;
    s.m_eq = equivalent_inertia(inv.m_p, inv.tau);
    s.coupling_scale = cfg.coupling_scale
                           ? *cfg.coupling_scale
                           : (nominal_load[l] > 0.0 ? 1.0 / nominal_load[l] : 1.0);

    const std::size_t row = result_row(bus);
    std::vector<double> dw(n);
    for (std::size_t k = 0; k < n; ++k) {
      dw[k] = result.bus_omega[row][k] - result.omega0;
    }
    s.local.resize(n);
    s.local_directional.resize(n);
    kernels::local_energy(0.5 * s.m_eq, dw.data(), s.local.data(),
                          s.local_directional.data(), n);

    s.coupling.assign(n, 0.0);
    s.coupling_directional.assign(n, 0.0);
    for (const Line& ln : model.lines) {
      int other;
      if (ln.from == bus) {
        other = ln.to;
      } else if (ln.to == bus) {
        other = ln.from;
      } else {
        continue;
      }
      s.neighbors.push_back(other);
      const std::size_t orow = result_row(other);
      kernels::coupling_accumulate(0.5 * ln.b * s.coupling_scale,
                                   result.bus_theta[row].data(),
                                   result.bus_theta[orow].data(),
                                   s.coupling.data(),
                                   s.coupling_directional.data(), n);
    }

    WindowedEnergy we = windowed_energy(s.local, s.coupling,
                                        s.local_directional,
                                        s.coupling_directional, cfg.window,
                                        cfg.weight, dt);
    s.total = std::move(we.total);
    s.directional = std::move(we.directional);
    out.buses.push_back(std::move(s));
  }
  return out;
}

std::vector<EnergySnapshot> take_snapshots(const EnergyFlowSeries& series,
                                           std::span<const double> times) {
  std::vector<EnergySnapshot> out;
  for (const double t : times) {
    if (series.time.empty() || t < series.time.front() - 1e-12) {
      throw DomainError("snapshot time before the trajectory start");
    }
    const auto it = std::upper_bound(series.time.begin(), series.time.end(),
                                     t + 1e-9);
    const auto k = static_cast<std::size_t>(it - series.time.begin()) - 1;
    EnergySnapshot s;
    s.requested = t;
    s.time = series.time[k];
    for (const auto& b : series.buses) {
      s.buses.push_back(b.bus);
      s.directional.push_back(b.directional[k]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::filesystem::path> write_energy_csv(
    const std::filesystem::path& dir, const EnergyFlowSeries& series) {
  static const std::vector<std::string> header{"t",    "E_l", "E_c", "E_ld",
                                               "E_cd", "E",   "E_d"};
  std::vector<std::filesystem::path> paths;
  for (const auto& b : series.buses) {
    const auto path = dir / ("energy_bus" + std::to_string(b.bus) + ".csv");
    const std::vector<std::vector<double>> cols{
        series.time,           b.local, b.coupling, b.local_directional,
        b.coupling_directional, b.total, b.directional};
    csv::write_columns(path, header, cols);
    paths.push_back(path);
  }
  return paths;
}

nlohmann::json snapshots_to_json(std::span<const EnergySnapshot> snaps) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : snaps) {
    nlohmann::json j;
    j["requested_time"] = s.requested;
    j["time"] = s.time;
    j["buses"] = s.buses;
    j["E_d"] = s.directional;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace lddl
