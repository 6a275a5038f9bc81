#pragma once

#include <filesystem>

#include <json.hpp>
#include "lddl/network.hpp"

namespace lddl {

/// Parses the model schema:
///   { "base_mva", "nominal_hz", "buses": [...], "lines": [...],
///     "devices": [...] }
/// Lines accept either "b" or "x" (b = 1/x); a nonzero "r" is rejected.
/// Missing device fields take the defaults of the device structs.
GridModel parse_model(const nlohmann::json& j);
GridModel load_model(const std::filesystem::path& path);
nlohmann::json model_to_json(const GridModel& model);

}  // namespace lddl
