#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lddl {

/// Inference-job emulator parameters. Powers in kW per server.
struct EmulatorConfig {
  std::size_t steps = 1000;   // horizon T in steps
  double dt = 1.0;            // s
  double eta = 0.1;           // arrival rate, 1/s
  double gamma = 30.0;        // mean job duration, s
  double gamma1 = 5.0;        // duration standard deviation, s
  std::size_t servers_per_rack = 16;  // M
  std::size_t racks = 10;             // N
  double p_peak = 0.7;
  double p_idle = 0.3;
  double alpha1 = 0.15;       // cooling ratio
  double alpha2 = 0.1;        // cooling response speed, (0, 1]
  std::uint64_t seed = 0;
};

/// Throws ConfigError naming the first violated field.
void validate(const EmulatorConfig& cfg);

struct Job {
  double arrival = 0.0;
  std::size_t server = 0;
  double duration = 0.0;
};

struct WorkloadTrace {
  std::vector<double> t;
  std::vector<double> p_ai;
  std::vector<double> p_cool;
  std::vector<double> p_lddl;
  std::vector<Job> jobs;
};

/// Bernoulli(eta*dt) arrivals per step onto a random idle server, durations
/// from Normal(gamma, gamma1) truncated at zero. One rack is simulated and
/// replicated N times. Deterministic for a given seed.
WorkloadTrace emulate_inference(const EmulatorConfig& cfg);

/// First-order cooling update toward alpha1 * p_ai.
constexpr double cooling_step(double p_cool, double p_ai, double alpha1,
                              double alpha2) noexcept {
  return p_cool + alpha2 * (alpha1 * p_ai - p_cool);
}

void write_trace_csv(const WorkloadTrace& trace,
                     const std::filesystem::path& path);

enum class PowerUnit { kw, pu };

std::optional<PowerUnit> parse_unit(const std::string& s);
const char* to_string(PowerUnit u) noexcept;

/// Timestamped LDDL demand. Timestamps strictly increase; values finite and
/// non-negative.
struct LoadProfile {
  std::vector<double> t;
  std::vector<double> value;
  PowerUnit unit = PowerUnit::pu;

  std::size_t size() const noexcept { return t.size(); }
  double mean() const;
  /// Zero-order hold lookup: the last sample at or before `time`. Times
  /// before the first sample take the first value.
  double at(double time) const;
};

/// Throws IngestError (line 0) on invariant violations.
void validate(const LoadProfile& profile);

LoadProfile constant_profile(double value, double t_end,
                             PowerUnit unit = PowerUnit::pu);

/// Reads a two-column CSV (time_s, power) with a header row. `unit` tags the
/// power column; with `base_mva` set, kW values are converted to p.u.
LoadProfile load_profile(const std::filesystem::path& path, PowerUnit unit,
                         std::optional<double> base_mva = std::nullopt);
void write_profile_csv(const LoadProfile& profile,
                       const std::filesystem::path& path);

LoadProfile to_per_unit(const LoadProfile& profile, double base_mva);

enum class HoldPolicy { zero_order, linear };

struct ResampleSpec {
  double dt = 0.0;
  HoldPolicy policy = HoldPolicy::zero_order;
  std::optional<double> start;  // defaults to the first timestamp
  std::optional<double> end;    // defaults to the last timestamp
};

/// mean + scale * (value - mean), then optional resampling. Throws
/// DomainError for scale <= 0 or a negative result, and for a resample range
/// outside the profile support.
LoadProfile transform_profile(const LoadProfile& profile, double scale,
                              const std::optional<ResampleSpec>& resample =
                                  std::nullopt);

LoadProfile resample_profile(const LoadProfile& profile,
                             const ResampleSpec& spec);

}  // namespace lddl
