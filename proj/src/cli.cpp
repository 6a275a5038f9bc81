#include "lddl/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "lddl/csv.hpp"
#include "lddl/error.hpp"
#include "lddl/model_io.hpp"
#include "lddl/scenario_io.hpp"

#ifndef LDDL_VERSION
#define LDDL_VERSION "0.0.0"
#endif

namespace lddl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const char* version() noexcept { return LDDL_VERSION; }

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p, const char* field) {
  const std::string text = read_file(p);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(field, p.string() + ": " + e.what());
  }
}

// Runs `body` and always writes a manifest, mapping exceptions to exit codes.
class Invocation {
 public:
  Invocation(std::string command, const GlobalOptions& g)
      : g_(g), started_(utc_now()) {
    manifest_["command"] = std::move(command);
    manifest_["version"] = version();
    manifest_["seed"] = g.seed ? json(*g.seed) : json(nullptr);
  }

  json& manifest() { return manifest_; }
  void output(const fs::path& p) { outputs_.push_back(p.string()); }
  void hash(std::string_view bytes) { hashed_ += bytes; }
  const GlobalOptions& globals() const { return g_; }

  int run(const std::function<void()>& body) {
    int code = ok;
    std::string message;
    try {
      fs::create_directories(g_.out_dir);
    } catch (const fs::filesystem_error& e) {
      report("cannot create output directory: " + std::string(e.what()));
      return io_error;
    }
    try {
      body();
    } catch (const ConfigError& e) {
      code = config_error;
      message = e.what();
      manifest_["error_field"] = e.field();
    } catch (const ModelError& e) {
      code = config_error;
      message = e.what();
    } catch (const DomainError& e) {
      code = config_error;
      message = e.what();
    } catch (const IoError& e) {
      code = io_error;
      message = e.what();
    } catch (const InfeasibleError& e) {
      code = infeasible;
      message = e.what();
      manifest_["power_flow_residual"] = e.residual();
      manifest_["power_flow_iterations"] = e.iterations();
    } catch (const ConvergenceError& e) {
      code = infeasible;
      message = e.what();
    } catch (const Error& e) {
      code = config_error;
      message = e.what();
    } catch (const fs::filesystem_error& e) {
      code = io_error;
      message = e.what();
    }
    if (!message.empty()) report(message);
    manifest_["config_hash"] = fnv1a_hex(hashed_);
    manifest_["started"] = started_;
    manifest_["finished"] = utc_now();
    manifest_["outputs"] = outputs_;
    manifest_["status"] = {{"exit_code", code}, {"message", message}};
    const fs::path mpath = g_.out_dir / "manifest.json";
    std::ofstream out(mpath);
    out << manifest_.dump(2) << '\n';
    if (!out) {
      report("cannot write " + mpath.string());
      return code == ok ? io_error : code;
    }
    return code;
  }

  void info(const std::string& msg) const {
    if (!g_.quiet) std::cout << msg << '\n';
  }

 private:
  void report(const std::string& msg) const {
    std::cerr << "error: " << msg << '\n';
  }

  GlobalOptions g_;
  std::string started_;
  std::string hashed_;
  json manifest_;
  std::vector<std::string> outputs_;
};

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer() || it->get<long long>() < 0) {
        throw ConfigError(key, "must be a non-negative integer");
      }
    } else if (!it->is_number()) {
      throw ConfigError(key, "must be a number");
    }
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "has the wrong type");
  }
}

void write_series(const fs::path& path, std::string_view prefix,
                  const std::vector<double>& t, const std::vector<int>& ids,
                  const std::vector<std::vector<double>>& rows,
                  Invocation& inv) {
  std::vector<std::string> header{"t"};
  std::vector<std::vector<double>> cols{t};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    header.push_back(std::string(prefix) + std::to_string(ids[i]));
    cols.push_back(rows[i]);
  }
  csv::write_columns(path, header, cols);
  inv.output(path);
}

std::vector<double> nominal_loads(const Scenario& sc) {
  std::vector<double> out;
  for (const auto& p : effective_profiles(sc)) out.push_back(p.at(0.0));
  return out;
}

}  // namespace

EmulatorConfig parse_emulator_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  EmulatorConfig c;
  c.steps = field_or<std::size_t>(j, "T", c.steps);
  c.dt = field_or<double>(j, "dt", c.dt);
  c.eta = field_or<double>(j, "eta", c.eta);
  c.gamma = field_or<double>(j, "gamma", c.gamma);
  c.gamma1 = field_or<double>(j, "gamma1", c.gamma1);
  c.servers_per_rack = field_or<std::size_t>(j, "M", c.servers_per_rack);
  c.racks = field_or<std::size_t>(j, "N", c.racks);
  c.p_peak = field_or<double>(j, "P_peak", c.p_peak);
  c.p_idle = field_or<double>(j, "P_idle", c.p_idle);
  c.alpha1 = field_or<double>(j, "alpha1", c.alpha1);
  c.alpha2 = field_or<double>(j, "alpha2", c.alpha2);
  c.seed = field_or<std::uint64_t>(j, "seed", c.seed);
  validate(c);
  return c;
}

int cmd_emulate(const fs::path& config, const fs::path& out,
                const GlobalOptions& g) {
  Invocation inv("emulate", g);
  return inv.run([&] {
    const std::string text = read_file(config);
    inv.hash(text);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError("config", e.what());
    }
    EmulatorConfig cfg = parse_emulator_config(j);
    if (g.seed) cfg.seed = *g.seed;
    inv.manifest()["seed"] = cfg.seed;
    inv.hash(std::to_string(cfg.seed));

    const WorkloadTrace tr = emulate_inference(cfg);
    const fs::path path = out.is_absolute() ? out : g.out_dir / out;
    write_trace_csv(tr, path);
    inv.output(path);
    LoadProfile prof;
    prof.t = tr.t;
    prof.value = tr.p_lddl;
    prof.unit = PowerUnit::kw;
    const fs::path ppath =
        path.parent_path() / (path.stem().string() + "_profile.csv");
    write_profile_csv(prof, ppath);
    inv.output(ppath);
    inv.manifest()["jobs"] = tr.jobs.size();
    inv.info("emulated " + std::to_string(tr.t.size()) + " steps, " +
             std::to_string(tr.jobs.size()) + " jobs -> " + path.string());
  });
}

int cmd_simulate(const fs::path& scenario, const GlobalOptions& g,
                 const SimulateOptions& opt) {
  Invocation inv("simulate", g);
  return inv.run([&] {
    inv.hash(read_file(scenario));
    const ScenarioFile sf = load_scenario(scenario);
    for (const auto& p : sf.profile_paths) inv.hash(read_file(p));
    inv.hash(read_file(sf.model_path));
    const Scenario& sc = sf.scenario;
    inv.manifest()["seed"] = g.seed ? *g.seed : sc.seed;

    const SimulationResult res = run_scenario(sc);
    const fs::path d = g.out_dir;
    write_series(d / "bus_omega.csv", "bus", res.time, res.bus_ids,
                 res.bus_omega, inv);
    write_series(d / "bus_theta.csv", "bus", res.time, res.bus_ids,
                 res.bus_theta, inv);
    write_series(d / "bus_voltage.csv", "bus", res.time, res.bus_ids, res.bus_v,
                 inv);
    write_series(d / "lddl_p.csv", "bus", res.time, res.lddl_buses, res.lddl_p,
                 inv);
    write_series(d / "lddl_q.csv", "bus", res.time, res.lddl_buses, res.lddl_q,
                 inv);
    write_series(d / "lddl_demand.csv", "bus", res.time, res.lddl_buses,
                 res.lddl_demand, inv);
    if (res.time.size() > opt.rocof_window && opt.rocof_window >= 1) {
      const double dt_out = res.time[1] - res.time[0];
      std::vector<std::vector<double>> rocof;
      for (const auto& w : res.bus_omega) {
        std::vector<double> hz(w.size());
        for (std::size_t k = 0; k < w.size(); ++k) {
          hz[k] = w[k] / (2.0 * std::numbers::pi);
        }
        rocof.push_back(compute_rocof(hz, dt_out, opt.rocof_window));
      }
      write_series(d / "bus_rocof.csv", "bus", res.time, res.bus_ids, rocof,
                   inv);
    }

    json& m = inv.manifest();
    m["model"] = model_to_json(sc.model);
    m["lddl_buses"] = res.lddl_buses;
    m["lddl_nominal"] = nominal_loads(sc);
    m["omega0"] = res.omega0;
    m["options"] = {{"horizon", sc.horizon},
                    {"dt", sc.dt},
                    {"output_dt", sc.output_dt},
                    {"integrator",
                     sc.integrator == Integrator::rk4 ? "rk4" : "heun"},
                    {"rocof_window", opt.rocof_window}};
    m["diverged"] = res.diverged;
    m["divergence_time"] =
        res.diverged ? json(res.divergence_time) : json(nullptr);
    m["divergence_reason"] = res.divergence_reason;
    inv.info(res.diverged ? "diverged at t=" + csv::format(res.divergence_time) +
                                " s (" + res.divergence_reason + ")"
                          : "completed " + csv::format(sc.horizon) + " s");
  });
}

int cmd_analyze_transient(const TransientOptions& opt, const GlobalOptions& g) {
  Invocation inv("analyze transient", g);
  return inv.run([&] {
    const fs::path mpath = opt.input / "manifest.json";
    const json sim = read_json(mpath, "input");
    inv.hash(sim.dump());
    if (!sim.contains("model") || !sim.contains("lddl_buses")) {
      throw ConfigError("input", mpath.string() + " is not a simulate manifest");
    }
    const GridModel model = parse_model(sim["model"]);

    SimulationResult res;
    res.omega0 = sim.value("omega0", model.omega0());
    res.lddl_buses = sim["lddl_buses"].get<std::vector<int>>();
    const auto nominal = sim["lddl_nominal"].get<std::vector<double>>();
    const csv::Table omega = csv::read_table(opt.input / "bus_omega.csv");
    const csv::Table theta = csv::read_table(opt.input / "bus_theta.csv");
    res.time = omega.column("t");
    for (const Bus& b : model.buses) {
      const std::string col = "bus" + std::to_string(b.id);
      res.bus_ids.push_back(b.id);
      res.bus_omega.push_back(omega.column(col));
      res.bus_theta.push_back(theta.column(col));
    }

    WindowConfig cfg = opt.window;
    validate(cfg);
    if (res.time.size() < 2 ||
        cfg.window > res.time.back() - res.time.front() + 1e-12) {
      throw ConfigError("window", "longer than the trajectory");
    }
    const EnergyFlowSeries series = analyze_transient(res, model, nominal, cfg);
    for (const auto& p : write_energy_csv(g.out_dir, series)) inv.output(p);
    const auto snaps = take_snapshots(series, opt.snapshot_times);
    const fs::path spath = g.out_dir / "snapshots.json";
    std::ofstream out(spath);
    out << snapshots_to_json(snaps).dump(2) << '\n';
    if (!out) throw IoError("cannot write " + spath.string());
    inv.output(spath);

    json& m = inv.manifest();
    m["input"] = opt.input.string();
    m["options"] = {{"window", cfg.window},
                    {"weight", cfg.weight},
                    {"snapshot_times", opt.snapshot_times}};
    json scales = json::array();
    for (const auto& b : series.buses) {
      scales.push_back({{"bus", b.bus},
                        {"m_eq", b.m_eq},
                        {"coupling_scale", b.coupling_scale}});
    }
    m["buses"] = std::move(scales);
    inv.info("energy metrics for " + std::to_string(series.buses.size()) +
             " LDDL bus(es)");
  });
}

std::vector<double> make_ramp(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start)) {
    throw ConfigError("ramp", "need step > 0 and stop >= start");
  }
  const auto n =
      static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = start + static_cast<double>(i) * step;
  }
  return r;
}

int cmd_analyze_smallsignal(const SmallSignalOptions& opt,
                            const GlobalOptions& g) {
  Invocation inv("analyze smallsignal", g);
  return inv.run([&] {
    inv.hash(read_file(opt.scenario));
    const ScenarioFile sf = load_scenario(opt.scenario);
    inv.hash(read_file(sf.model_path));
    const Scenario& sc = sf.scenario;
    if (opt.ramp.empty()) throw ConfigError("ramp", "no ramp points");
    if (!(opt.thresholds.zeta_min >= 0.0)) {
      throw ConfigError("zeta_min", "must be non-negative");
    }
    std::ostringstream ramp_text;
    for (const double r : opt.ramp) ramp_text << csv::format(r) << ';';
    inv.hash(ramp_text.str());

    std::vector<int> buses;
    for (const auto& a : sc.lddl) buses.push_back(a.bus);
    const std::vector<double> nominal = nominal_loads(sc);
    SweepOptions so;
    so.thresholds = opt.thresholds;
    so.reference_bus = sc.reference_bus;
    const SnapshotSweep sweep =
        snapshot_sweep(sc.model, buses, nominal, opt.ramp, so);

    const fs::path jpath = g.out_dir / "sweep.json";
    std::ofstream out(jpath);
    out << sweep_to_json(sweep).dump(2) << '\n';
    if (!out) throw IoError("cannot write " + jpath.string());
    inv.output(jpath);
    const fs::path cpath = g.out_dir / "sweep.csv";
    write_sweep_csv(cpath, sweep);
    inv.output(cpath);

    std::size_t good = 0;
    json failed = json::array();
    for (const auto& p : sweep.points) {
      if (p.ok) {
        ++good;
      } else {
        failed.push_back({{"multiplier", p.multiplier}, {"error", p.error}});
      }
    }
    json& m = inv.manifest();
    m["options"] = {{"ramp", opt.ramp},
                    {"zeta_min", opt.thresholds.zeta_min},
                    {"m_min", opt.thresholds.m_min}};
    m["points"] = sweep.points.size();
    m["failed_points"] = std::move(failed);
    m["critical"] = sweep.critical;
    inv.info(std::to_string(good) + "/" + std::to_string(sweep.points.size()) +
             " snapshots, " + std::to_string(sweep.critical.size()) +
             " critical");
    if (good == 0) {
      throw InfeasibleError("no ramp point produced a snapshot",
                            std::numeric_limits<double>::quiet_NaN(), 0);
    }
  });
}

int cmd_validate(const fs::path& file, const GlobalOptions& g) {
  Invocation inv("validate", g);
  return inv.run([&] {
    const json j = read_json(file, "file");
    inv.hash(j.dump());
    GridModel model;
    if (j.contains("buses")) {
      model = parse_model(j);
    } else {
      model = load_scenario(file).scenario.model;
    }
    const auto violations = validate_model(model);
    json list = json::array();
    for (const auto& v : violations) {
      list.push_back({{"entity", v.entity}, {"rule", v.rule}});
      inv.info(v.entity + ": " + v.rule);
    }
    inv.manifest()["violations"] = std::move(list);
    if (!violations.empty()) {
      throw ConfigError("model", std::to_string(violations.size()) +
                                     " violation(s)");
    }
    inv.info("ok");
  });
}

int cmd_usage_error(const std::string& command, const std::string& message,
                    const GlobalOptions& g) {
  Invocation inv(command, g);
  return inv.run([&] { throw ConfigError("arguments", message); });
}

}  // namespace lddl::cli
