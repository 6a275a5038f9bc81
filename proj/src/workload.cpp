#include "lddl/workload.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lddl/csv.hpp"
#include "lddl/error.hpp"

namespace lddl {

void validate(const EmulatorConfig& cfg) {
  auto require = [](bool ok, const char* field, const char* rule) {
    if (!ok) throw ConfigError(field, rule);
  };
  require(cfg.steps >= 1, "T", "horizon must be at least one step");
  require(cfg.dt > 0.0 && std::isfinite(cfg.dt), "dt", "must be positive");
  require(cfg.eta >= 0.0 && std::isfinite(cfg.eta), "eta",
          "must be non-negative");
  require(cfg.eta * cfg.dt <= 1.0, "eta",
          "eta*dt exceeds 1; Bernoulli arrival approximation invalid");
  require(cfg.gamma > 0.0, "gamma", "must be positive");
  require(cfg.gamma1 >= 0.0, "gamma1", "must be non-negative");
  require(cfg.servers_per_rack >= 1, "M", "must be at least 1");
  require(cfg.racks >= 1, "N", "must be at least 1");
  require(cfg.p_peak >= 0.0 && std::isfinite(cfg.p_peak), "P_peak",
          "must be non-negative");
  require(cfg.p_idle >= 0.0 && std::isfinite(cfg.p_idle), "P_idle",
          "must be non-negative");
  require(cfg.alpha1 >= 0.0, "alpha1", "must be non-negative");
  require(cfg.alpha2 > 0.0 && cfg.alpha2 <= 1.0, "alpha2",
          "must lie in (0, 1]");
}

WorkloadTrace emulate_inference(const EmulatorConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> duration(cfg.gamma,
                                            cfg.gamma1 > 0.0 ? cfg.gamma1 : 1.0);

  const std::size_t m = cfg.servers_per_rack;
  std::vector<double> remaining(m, 0.0);
  std::vector<std::size_t> idle;
  idle.reserve(m);

  WorkloadTrace tr;
  tr.t.reserve(cfg.steps);
  tr.p_ai.reserve(cfg.steps);
  tr.p_cool.reserve(cfg.steps);
  tr.p_lddl.reserve(cfg.steps);

  double p_cool = 0.0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const double t = static_cast<double>(step) * cfg.dt;
    if (cfg.eta * cfg.dt > uniform(rng)) {
      idle.clear();
      for (std::size_t s = 0; s < m; ++s) {
        if (remaining[s] <= 0.0) idle.push_back(s);
      }
      if (!idle.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, idle.size() - 1);
        const std::size_t server = idle[pick(rng)];
        const double d =
            cfg.gamma1 > 0.0 ? std::max(0.0, duration(rng)) : cfg.gamma;
        remaining[server] = d;
        tr.jobs.push_back({t, server, d});
      }
    }

    double p_ai = 0.0;
    for (double& r : remaining) {
      if (r > 0.0) {
        p_ai += cfg.p_idle + cfg.p_peak;
        r -= cfg.dt;
      } else {
        p_ai += cfg.p_idle;
      }
    }
    p_ai *= static_cast<double>(cfg.racks);
    p_cool = cooling_step(p_cool, p_ai, cfg.alpha1, cfg.alpha2);

    tr.t.push_back(t);
    tr.p_ai.push_back(p_ai);
    tr.p_cool.push_back(p_cool);
    tr.p_lddl.push_back(p_ai + p_cool);
  }
  return tr;
}

void write_trace_csv(const WorkloadTrace& trace,
                     const std::filesystem::path& path) {
  const std::vector<std::string> header{"t", "P_AI", "P_cool", "P_LDDL"};
  const std::vector<std::vector<double>> cols{trace.t, trace.p_ai,
                                              trace.p_cool, trace.p_lddl};
  csv::write_columns(path, header, cols);
}

std::optional<PowerUnit> parse_unit(const std::string& s) {
  if (s == "kW" || s == "kw") return PowerUnit::kw;
  if (s == "pu" || s == "p.u.") return PowerUnit::pu;
  return std::nullopt;
}

const char* to_string(PowerUnit u) noexcept {
  return u == PowerUnit::kw ? "kW" : "pu";
}

double LoadProfile::mean() const {
  if (value.empty()) return 0.0;
  return std::accumulate(value.begin(), value.end(), 0.0) /
         static_cast<double>(value.size());
}

double LoadProfile::at(double time) const {
  auto it = std::upper_bound(t.begin(), t.end(), time);
  if (it == t.begin()) return value.front();
  return value[static_cast<std::size_t>(it - t.begin()) - 1];
}

void validate(const LoadProfile& p) {
  if (p.t.size() != p.value.size()) {
    throw IngestError(0, "timestamp and value counts differ");
  }
  if (p.t.empty()) throw IngestError(0, "profile is empty");
  for (std::size_t i = 0; i < p.t.size(); ++i) {
    if (!std::isfinite(p.t[i])) throw IngestError(0, "non-finite timestamp");
    if (i > 0 && !(p.t[i] > p.t[i - 1])) {
      throw IngestError(0, "timestamps must strictly increase");
    }
    if (!std::isfinite(p.value[i]) || p.value[i] < 0.0) {
      throw IngestError(0, "power values must be finite and non-negative");
    }
  }
}

LoadProfile constant_profile(double value, double t_end, PowerUnit unit) {
  LoadProfile p;
  p.t = {0.0, t_end};
  p.value = {value, value};
  p.unit = unit;
  return p;
}

LoadProfile load_profile(const std::filesystem::path& path, PowerUnit unit,
                         std::optional<double> base_mva) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open profile " + path.string());
  LoadProfile p;
  p.unit = unit;
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream ss(line);
    std::string a;
    std::string b;
    std::string extra;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') ||
        std::getline(ss, extra, ',')) {
      throw IngestError(lineno, "expected two columns (time, power)");
    }
    auto parse = [lineno](const std::string& s) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(s.c_str(), &end);
      while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
      if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
        throw IngestError(lineno, "cannot parse '" + s + "'");
      }
      return v;
    };
    const double t = parse(a);
    const double v = parse(b);
    if (!p.t.empty() && !(t > p.t.back())) {
      throw IngestError(lineno, "timestamp " + csv::format(t) +
                                    " does not increase");
    }
    if (!std::isfinite(v) || v < 0.0) {
      throw IngestError(lineno, "negative or non-finite power");
    }
    p.t.push_back(t);
    p.value.push_back(v);
  }
  if (p.t.empty()) throw IngestError(lineno, "profile has no data rows");
  if (base_mva && unit == PowerUnit::kw) return to_per_unit(p, *base_mva);
  return p;
}

void write_profile_csv(const LoadProfile& profile,
                       const std::filesystem::path& path) {
  const std::vector<std::string> header{"t", "power"};
  const std::vector<std::vector<double>> cols{profile.t, profile.value};
  csv::write_columns(path, header, cols);
}

LoadProfile to_per_unit(const LoadProfile& profile, double base_mva) {
  if (!(base_mva > 0.0)) throw DomainError("base_mva must be positive");
  if (profile.unit == PowerUnit::pu) return profile;
  LoadProfile out = profile;
  for (double& v : out.value) v /= base_mva * 1000.0;
  out.unit = PowerUnit::pu;
  return out;
}

LoadProfile resample_profile(const LoadProfile& profile,
                             const ResampleSpec& spec) {
  validate(profile);
  if (!(spec.dt > 0.0)) throw DomainError("resample dt must be positive");
  const double start = spec.start.value_or(profile.t.front());
  const double end = spec.end.value_or(profile.t.back());
  if (start < profile.t.front() || end > profile.t.back() || end < start) {
    throw DomainError("resample range [" + csv::format(start) + ", " +
                      csv::format(end) + "] lies outside profile support");
  }
  LoadProfile out;
  out.unit = profile.unit;
  const auto count =
      static_cast<std::size_t>(std::floor((end - start) / spec.dt + 1e-9)) + 1;
  out.t.reserve(count);
  out.value.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = start + static_cast<double>(k) * spec.dt;
    double v = 0.0;
    if (spec.policy == HoldPolicy::zero_order) {
      v = profile.at(t);
    } else {
      auto it = std::upper_bound(profile.t.begin(), profile.t.end(), t);
      if (it == profile.t.end()) {
        v = profile.value.back();
      } else {
        const auto hi = static_cast<std::size_t>(it - profile.t.begin());
        const std::size_t lo = hi - 1;
        const double frac =
            (t - profile.t[lo]) / (profile.t[hi] - profile.t[lo]);
        v = profile.value[lo] + frac * (profile.value[hi] - profile.value[lo]);
      }
    }
    out.t.push_back(t);
    out.value.push_back(v);
  }
  return out;
}

LoadProfile transform_profile(const LoadProfile& profile, double scale,
                              const std::optional<ResampleSpec>& resample) {
  validate(profile);
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw DomainError("fluctuation scale must be positive");
  }
  LoadProfile out = profile;
  const bool flat = std::all_of(
      profile.value.begin(), profile.value.end(),
      [&](double v) { return v == profile.value.front(); });
  if (scale != 1.0 && !flat) {
    const double mu = profile.mean();
    for (double& v : out.value) {
      v = mu + scale * (v - mu);
      if (v < 0.0) {
        throw DomainError("fluctuation scale drives the profile negative");
      }
    }
  }
  if (resample) return resample_profile(out, *resample);
  return out;
}

}  // namespace lddl
