// Scenario documents (JSON). See docs/scenario_format.md for the schema.
#pragma once

#include <filesystem>
#include <string>

#include "transitmp/network.hpp"

namespace transitmp {

/// Parses and validates a scenario file. Throws ConfigError carrying the
/// offending field (parse failure) or every violated invariant (validation).
Scenario load_scenario(const std::filesystem::path& path);

/// Same as load_scenario but from text; relative paths resolve against base_dir.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});

/// Parses without validating; used by the `validate` subcommand to report
/// every violation instead of stopping at the first.
Scenario parse_scenario_unchecked(const std::string& text, const std::filesystem::path& base_dir = {});

}  // namespace transitmp
