#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>

#include "dqsim/event_log.hpp"

namespace dqsim {

// CSV body: one row per task, times with 9 significant digits, observed
// queue lengths joined with '|', servers numbered from 1.
void write_log_csv(std::ostream& out, const EventLog& log);

// Sidecar `key = value` text: the config plus horizon, arm counts,
// emptied_at and the group partition, all printed exactly.
std::string format_log_meta(const EventLog& log);

// Writes `path` and `path.meta`.
void write_log(const EventLog& log, const std::filesystem::path& path);

// Rebuilds an EventLog from the two texts. Path statistics are not stored
// and come back zeroed. Throws ParseError for malformed input.
EventLog parse_log(std::string_view csv, std::string_view meta);
EventLog read_log(const std::filesystem::path& path);

std::filesystem::path meta_path(const std::filesystem::path& log_path);

}  // namespace dqsim
