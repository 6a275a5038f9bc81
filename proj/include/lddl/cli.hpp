#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lddl/smallsignal.hpp"
#include "lddl/transient_metrics.hpp"
#include "lddl/workload.hpp"

namespace lddl::cli {

enum ExitCode : int { ok = 0, config_error = 2, io_error = 3, infeasible = 4 };

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = ".";
  bool quiet = false;
};

const char* version() noexcept;

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view bytes);

/// Emulator config JSON: T, dt, eta, gamma, gamma1, M, N, P_peak, P_idle,
/// alpha1, alpha2, seed. Throws ConfigError naming the field.
EmulatorConfig parse_emulator_config(const nlohmann::json& j);

/// Writes the trace (t, P_AI, P_cool, P_LDDL in kW) to `out` (relative to
/// out_dir) plus `<stem>_profile.csv` usable as a kW LDDL profile.
int cmd_emulate(const std::filesystem::path& config,
                const std::filesystem::path& out, const GlobalOptions& g);

struct SimulateOptions {
  std::size_t rocof_window = 10;  // samples of the output grid
};

/// Trajectory CSVs (bus_omega, bus_theta, bus_voltage, bus_rocof, lddl_p,
/// lddl_q, lddl_demand) and a manifest. Divergence is a result: exit 0.
int cmd_simulate(const std::filesystem::path& scenario, const GlobalOptions& g,
                 const SimulateOptions& opt = {});

struct TransientOptions {
  std::filesystem::path input;  // directory written by cmd_simulate
  WindowConfig window;
  std::vector<double> snapshot_times;
};

int cmd_analyze_transient(const TransientOptions& opt, const GlobalOptions& g);

struct SmallSignalOptions {
  std::filesystem::path scenario;  // model, LDDL buses, nominal demand at t=0
  std::vector<double> ramp;        // relative demand variations
  StabilityThresholds thresholds;
};

/// Evenly spaced ramp from start to stop inclusive.
std::vector<double> make_ramp(double start, double stop, double step);

/// sweep.json and sweep.csv. Exit 0 when at least one point succeeded.
int cmd_analyze_smallsignal(const SmallSignalOptions& opt,
                            const GlobalOptions& g);

/// Checks a model or scenario file; violations are listed in the manifest.
int cmd_validate(const std::filesystem::path& file, const GlobalOptions& g);

/// Records a command-line usage error in the manifest; returns exit code 2.
int cmd_usage_error(const std::string& command, const std::string& message,
                    const GlobalOptions& g);

}  // namespace lddl::cli
