#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "dqsim/event_log.hpp"

namespace dqsim::test {

struct Row {
  int action = 0;
  std::vector<std::uint32_t> observed;
  std::uint32_t server = 0;
  std::uint32_t queue = 0;  // assigned_queue
  double response = 1.0;
  double delay = 0.0;
  std::uint64_t backlog = 0;
};

// Builds a log by hand; arrival times are spaced one unit apart.
inline EventLog make_log(SimConfig config, const std::vector<Row>& rows) {
  EventLog log;
  log.config = config;
  log.horizon = config.horizon;
  for (const Row& r : rows) {
    TaskRecord t;
    t.index = log.records.size();
    t.arrival_time = static_cast<double>(t.index);
    t.action = r.action;
    t.assigned_server = r.server;
    t.assigned_queue = r.queue;
    t.response_time = r.response;
    t.service_duration = r.response - r.delay;
    t.dispatcher_delay = r.delay;
    t.dispatcher_backlog = r.backlog;
    t.observed_offset = log.observed_values.size();
    t.observed_count = static_cast<std::uint32_t>(r.observed.size());
    log.observed_values.insert(log.observed_values.end(), r.observed.begin(), r.observed.end());
    (r.action ? log.n_treatment : log.n_control)++;
    log.records.push_back(t);
  }
  return log;
}

inline SimConfig small_config(int n = 20, double lambda = 0.8, double horizon = 1e3, std::uint64_t seed = 1) {
  SimConfig c;
  c.n_servers = n;
  c.arrival = ConstantArrival{lambda};
  c.service = ExponentialService{std::vector<double>(static_cast<std::size_t>(n), 1.0)};
  c.horizon = horizon;
  c.seed = seed;
  return c;
}

}  // namespace dqsim::test
