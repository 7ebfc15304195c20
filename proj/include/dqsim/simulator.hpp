#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dqsim/config.hpp"
#include "dqsim/event_log.hpp"
#include "dqsim/rng.hpp"

namespace dqsim {

struct SystemState {
  std::vector<std::uint32_t> queue_lengths;  // includes the job in service
  std::uint64_t dispatcher_backlog = 0;
  double clock = 0.0;
};

// s_i = (1/N) #{j : q_j >= i} for i = 0..max q.
std::vector<double> occupancy(std::span<const std::uint32_t> queue_lengths);

// Next arrival epoch after `clock`. Sinusoidal rates are thinned against the
// peak rate; acceptance draws from its own stream so that a zero amplitude
// reproduces the constant-rate epochs exactly.
double next_arrival(double clock, const ArrivalSpec& spec, int n_servers, Rng& candidates, Rng& thinning);

// `server` is 0-based.
double sample_service(const ServiceSpec& spec, std::uint32_t server, Rng& rng);

int choose_action(double p, Rng& rng);

struct Assignment {
  std::vector<std::uint32_t> observed;
  std::uint32_t server = 0;
  std::uint32_t assigned_queue = 0;
};

// Routes one job. `eligible` lists candidate server indices; `queues` is
// indexed by server.
Assignment assign(const PolicySpec& policy, std::span<const std::uint32_t> queues,
                  std::span<const std::uint32_t> eligible, Rng& rng);

// Same as assign() but reuses `out`'s storage.
void assign_into(const PolicySpec& policy, std::span<const std::uint32_t> queues,
                 std::span<const std::uint32_t> eligible, Rng& rng, Assignment& out);

struct SimOptions {
  // Ground-truth runs only need the response-time totals in PathStats.
  bool keep_records = true;
  // Called after every processed event.
  std::function<void(const SystemState&)> observer;
};

// Runs [0, T] from an empty system, then drains every job that arrived
// before T. Dispatches to the delayed-dispatch model when
// config.delay_enabled is set.
EventLog simulate(const SimConfig& config, const SimOptions& options = {});

// The communication-delay model: each job waits at the dispatcher for the
// slowest of its probed servers to report, then joins the shortest queue
// reported at release time. With delay disabled this is simulate().
EventLog simulate_with_delay(const SimConfig& config, const SimOptions& options = {});

}  // namespace dqsim
