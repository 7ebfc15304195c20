#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "dqsim/config.hpp"
#include "dqsim/harness.hpp"

namespace dqsim {

// A parsed `key = value` file. Lines are trimmed, `#` starts a comment.
// Table files (those with a `table` key) need nothing else; every other
// file must name n_servers and both policies.
struct ParsedConfig {
  SimConfig sim;
  ExperimentPlan plan;  // plan.base == sim
  std::optional<int> table;
  std::optional<double> scale;
};

// Throws ParseError (with the 1-based line) for malformed lines, unknown or
// repeated keys and unreadable values, and ConfigInvalid once assembled
// values break an invariant.
ParsedConfig parse_config(std::string_view text);
ParsedConfig load_config(const std::filesystem::path& path);

// Value syntaxes shared with the log metadata files.
PolicySpec parse_policy(std::string_view text);
ServiceSpec parse_service(std::string_view text, int n_servers);
Design parse_design(std::string_view text);

// Config lines reproducing `config` exactly when parsed back.
std::string format_sim_config(const SimConfig& config);

}  // namespace dqsim
