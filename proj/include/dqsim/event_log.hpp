#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dqsim/config.hpp"

namespace dqsim {

// One arrival as seen by the experimenter. Server indices are 0-based in
// memory and 1-based in the CSV serialization.
struct TaskRecord {
  std::uint64_t index = 0;
  double arrival_time = 0.0;
  int action = 0;
  std::uint32_t assigned_server = 0;
  // Queue length of the assigned server as known to the dispatcher when it
  // decided: the observed minimum for shortest-queue rules, 0 for the JIQ
  // idle branch.
  std::uint32_t assigned_queue = 0;
  double service_duration = 0.0;
  double response_time = 0.0;
  double dispatcher_delay = 0.0;
  std::uint64_t dispatcher_backlog = 0;
  std::size_t observed_offset = 0;
  std::uint32_t observed_count = 0;
};

// Time integrals over the sample path, used by the Little's-law and
// mean-field checks. Areas labelled "horizon" stop at T; the in-system area
// runs until the system drains.
struct PathStats {
  double area_in_system = 0.0;
  double area_in_system_horizon = 0.0;
  double area_queued_horizon = 0.0;
  // occupancy_area[i] = integral over [0, T] of #{servers with q >= i}.
  std::vector<double> occupancy_area;
  std::uint64_t departures = 0;
  std::uint32_t max_queue_length = 0;
  double response_time_sum = 0.0;
  std::uint64_t response_count = 0;

  // Time-average fraction of servers with at least i jobs.
  double occupancy(std::size_t i, int n_servers, double horizon) const {
    if (i >= occupancy_area.size()) return i == 0 ? 1.0 : 0.0;
    return occupancy_area[i] / (static_cast<double>(n_servers) * horizon);
  }
};

using GroupPartition = std::array<std::vector<std::uint32_t>, 2>;

struct EventLog {
  SimConfig config;
  std::vector<TaskRecord> records;
  std::vector<std::uint32_t> observed_values;
  double horizon = 0.0;
  std::size_t n_control = 0;
  std::size_t n_treatment = 0;
  std::optional<GroupPartition> group_partition;
  std::optional<double> emptied_at;
  PathStats stats;

  std::span<const std::uint32_t> observed(const TaskRecord& r) const {
    return {observed_values.data() + r.observed_offset, r.observed_count};
  }
  std::size_t size() const { return records.size(); }
  int n_servers() const { return config.n_servers; }
};

}  // namespace dqsim
