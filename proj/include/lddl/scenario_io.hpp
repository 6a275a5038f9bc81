#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "lddl/simulator.hpp"

namespace lddl {

struct ScenarioFile {
  Scenario scenario;
  std::filesystem::path model_path;
  std::vector<std::filesystem::path> profile_paths;  // empty for inline
};

/// Scenario JSON. Relative paths resolve against `base_dir`. Missing files
/// raise IoError, malformed fields ConfigError.
///
///   { "model": "models/three_bus.json",
///     "lddl": [ { "bus": 2, "profile": "profiles/a.csv", "unit": "pu",
///                 "fluctuation_scale": 1.0, "gain": 1.0 },
///               { "bus": 4, "constant": 0.5 } ],
///     "horizon": 10, "dt": 0.001, "output_dt": 0.01,
///     "integrator": "rk4", "reference_bus": 1, "seed": 0 }
ScenarioFile parse_scenario(const nlohmann::json& j,
                            const std::filesystem::path& base_dir);
ScenarioFile load_scenario(const std::filesystem::path& path);

}  // namespace lddl
