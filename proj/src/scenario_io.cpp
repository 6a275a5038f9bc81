#include "lddl/scenario_io.hpp"

#include <fstream>

#include "lddl/error.hpp"
#include "lddl/model_io.hpp"

namespace lddl {

using nlohmann::json;

namespace {

double number(const json& j, const std::string& key, double fallback,
              const std::string& field) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_number()) throw ConfigError(field, "must be a number");
  return it->get<double>();
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

ScenarioFile parse_scenario(const json& j,
                            const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("scenario", "must be a JSON object");
  ScenarioFile out;
  Scenario& sc = out.scenario;

  if (!j.contains("model") || !j["model"].is_string()) {
    throw ConfigError("model", "path to the model file required");
  }
  out.model_path = resolve(base_dir, j["model"].get<std::string>());
  try {
    sc.model = load_model(out.model_path);
  } catch (const ModelError& e) {
    throw ConfigError("model", e.what());
  }

  sc.horizon = number(j, "horizon", sc.horizon, "horizon");
  sc.dt = number(j, "dt", sc.dt, "dt");
  sc.output_dt = number(j, "output_dt", sc.output_dt, "output_dt");
  const std::string integ = j.value("integrator", "rk4");
  if (integ == "rk4") {
    sc.integrator = Integrator::rk4;
  } else if (integ == "heun" || integ == "trapezoidal") {
    sc.integrator = Integrator::heun;
  } else {
    throw ConfigError("integrator", "must be \"rk4\" or \"heun\"");
  }
  if (j.contains("reference_bus") && !j["reference_bus"].is_null()) {
    if (!j["reference_bus"].is_number_integer()) {
      throw ConfigError("reference_bus", "must be an integer");
    }
    sc.reference_bus = j["reference_bus"].get<int>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) {
      throw ConfigError("seed", "must be a non-negative integer");
    }
    sc.seed = j["seed"].get<std::uint64_t>();
  }

  const json lddl = j.value("lddl", json::array());
  if (!lddl.is_array()) throw ConfigError("lddl", "must be an array");
  for (std::size_t i = 0; i < lddl.size(); ++i) {
    const json& e = lddl[i];
    const std::string field = "lddl[" + std::to_string(i) + "]";
    if (!e.is_object() || !e.contains("bus") || !e["bus"].is_number_integer()) {
      throw ConfigError(field + ".bus", "integer bus id required");
    }
    LddlAttachment a;
    a.bus = e["bus"].get<int>();
    a.fluctuation_scale =
        number(e, "fluctuation_scale", 1.0, field + ".fluctuation_scale");
    a.gain = number(e, "gain", 1.0, field + ".gain");
    const std::string unit_s = e.value("unit", "pu");
    const auto unit = parse_unit(unit_s);
    if (!unit) throw ConfigError(field + ".unit", "must be \"kw\" or \"pu\"");

    if (e.contains("profile")) {
      if (!e["profile"].is_string()) {
        throw ConfigError(field + ".profile", "must be a path");
      }
      const auto path = resolve(base_dir, e["profile"].get<std::string>());
      try {
        a.profile = load_profile(path, *unit);
      } catch (const IngestError& err) {
        throw ConfigError(field + ".profile",
                          path.string() + ": " + err.what());
      }
      out.profile_paths.push_back(path);
    } else if (e.contains("constant")) {
      const double v = number(e, "constant", 0.0, field + ".constant");
      a.profile = constant_profile(v, sc.horizon + sc.dt, *unit);
    } else {
      throw ConfigError(field + ".profile", "\"profile\" or \"constant\" required");
    }
    sc.lddl.push_back(std::move(a));
  }
  validate(sc);
  return out;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scenario", path.string() + ": " + e.what());
  }
  return parse_scenario(j, path.parent_path());
}

}  // namespace lddl
