#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "uwbt/model.hpp"

namespace uwbt {

inline constexpr const char* kScenarioSchema = "uwbt-scenario/1";

/// Malformed scenario text or a field of the wrong type.
class ConfigParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The file declares a schema this build does not read.
class SchemaVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

DeploymentConfig parse_config(const std::string& text);
DeploymentConfig load_config(const std::filesystem::path& path);

/// Canonical pretty-printed form; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const DeploymentConfig& config);

/// FNV-1a over the canonical form.
std::uint64_t config_hash(const DeploymentConfig& config);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace uwbt
