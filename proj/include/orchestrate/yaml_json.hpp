#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

namespace orchestrate {

/// Loads a YAML document as JSON. Plain scalars become integers, reals or
/// booleans when they parse as such; quoted scalars stay strings. Throws
/// Error(invalid_argument) on unreadable or malformed files.
nlohmann::json load_yaml_file(const std::filesystem::path& path);
nlohmann::json parse_yaml(const std::string& text);

}  // namespace orchestrate
