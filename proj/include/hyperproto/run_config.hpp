#pragma once

// Flat `key: value` configuration documents for experiment runs. Blank lines
// and `#` comments are ignored; several documents in one file are separated
// by a line containing only `---`.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hyperproto/fewshot.hpp"

namespace hyperproto {

struct RunConfig {
  ExperimentConfig experiment;
  /// CSV file the train command appends its result row to; empty for none.
  std::string output;
};

/// Default sphere radius, 1/sqrt(0.006).
double default_sphere_radius();

using ConfigFields = std::map<std::string, std::string, std::less<>>;

/// Raw fields of one document. ConfigError on malformed lines, unknown keys
/// and duplicates.
ConfigFields parse_fields(std::string_view text);
/// Builds and validates a config from fields; absent keys keep defaults.
RunConfig config_from_fields(const ConfigFields& fields);

RunConfig parse_run_config(std::string_view text);
/// Every key, in a fixed order, parseable by parse_run_config.
std::string serialize(const RunConfig& config);

/// Splits a multi-document text. Later documents inherit every field of the
/// first one except the space-specific keys (space, k, r, epsilon, clip,
/// gradient_mode). The data and evaluation settings must agree across
/// documents; a mismatch is a ConfigError naming the field.
std::vector<RunConfig> parse_compare_configs(std::string_view text);

/// Reads a whole file; IoError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace hyperproto
