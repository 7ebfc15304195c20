#include "dqsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "dqsim/errors.hpp"
#include "dqsim/numeric.hpp"

namespace dqsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Uniform ordered sample of d distinct entries of `pool`.
void sample_distinct(std::span<const std::uint32_t> pool, std::size_t d, Rng& rng,
                     std::vector<std::uint32_t>& out) {
  const std::size_t m = pool.size();
  out.clear();
  if (2 * d <= m) {
    while (out.size() < d) {
      const std::uint32_t pick = pool[rng.below(m)];
      if (std::find(out.begin(), out.end(), pick) == out.end()) out.push_back(pick);
    }
    return;
  }
  out.assign(pool.begin(), pool.end());
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t j = k + rng.below(m - k);
    std::swap(out[k], out[j]);
  }
  out.resize(d);
}

// Argmin over `candidates` with ties broken uniformly (reservoir sampling).
std::uint32_t argmin_uniform(std::span<const std::uint32_t> candidates, std::span<const std::uint32_t> queues,
                             Rng& rng) {
  std::uint32_t best = candidates.front();
  std::uint32_t best_q = queues[best];
  std::size_t ties = 1;
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const std::uint32_t s = candidates[k];
    const std::uint32_t q = queues[s];
    if (q < best_q) {
      best = s;
      best_q = q;
      ties = 1;
    } else if (q == best_q) {
      ++ties;
      if (rng.below(ties) == 0) best = s;
    }
  }
  return best;
}

// Observe the queues of `targets` and join the shortest.
void join_shortest(std::span<const std::uint32_t> targets, std::span<const std::uint32_t> queues, Rng& rng,
                   Assignment& out) {
  out.observed.clear();
  for (std::uint32_t s : targets) out.observed.push_back(queues[s]);
  out.server = argmin_uniform(targets, queues, rng);
  out.assigned_queue = queues[out.server];
}

// JIQ idle branch. The dispatcher only learns that some server is idle; the
// recorded observation is the queue of one server drawn from the whole pool.
bool try_idle(std::span<const std::uint32_t> queues, std::span<const std::uint32_t> eligible, Rng& rng,
              std::vector<std::uint32_t>& idle, Assignment& out) {
  idle.clear();
  for (std::uint32_t s : eligible)
    if (queues[s] == 0) idle.push_back(s);
  if (idle.empty()) return false;
  out.server = idle[rng.below(idle.size())];
  out.assigned_queue = 0;
  out.observed.assign(1, queues[eligible[rng.below(eligible.size())]]);
  return true;
}

thread_local std::vector<std::uint32_t> tl_picks;

}  // namespace

std::vector<double> occupancy(std::span<const std::uint32_t> queue_lengths) {
  const auto n = static_cast<double>(queue_lengths.size());
  std::uint32_t top = 0;
  for (auto q : queue_lengths) top = std::max(top, q);
  std::vector<double> counts(static_cast<std::size_t>(top) + 1, 0.0);
  for (auto q : queue_lengths)
    for (std::uint32_t i = 0; i <= q; ++i) counts[i] += 1.0;
  for (auto& c : counts) c /= n;
  return counts;
}

double next_arrival(double clock, const ArrivalSpec& spec, int n_servers, Rng& candidates, Rng& thinning) {
  const double n = static_cast<double>(n_servers);
  return std::visit(overloaded{
                        [&](const ConstantArrival& a) { return clock + candidates.exponential(n * a.lambda); },
                        [&](const SinusoidalArrival& a) {
                          const double peak = a.base + a.amplitude;
                          double t = clock;
                          for (;;) {
                            t += candidates.exponential(n * peak);
                            const double rate = a.base + a.amplitude * std::sin(t);
                            if (thinning.uniform() * peak < rate) return t;
                          }
                        },
                    },
                    spec);
}

double sample_service(const ServiceSpec& spec, std::uint32_t server, Rng& rng) {
  return std::visit(overloaded{
                        [&](const ExponentialService& s) { return rng.exponential(s.rates[server]); },
                        [&](const DeterministicService& s) { return 1.0 / s.rates[server]; },
                        [&](const ParetoService& s) { return s.scale * std::pow(1.0 - rng.uniform(), -1.0 / s.shape); },
                    },
                    spec);
}

int choose_action(double p, Rng& rng) { return rng.uniform() < p ? 1 : 0; }

void assign_into(const PolicySpec& policy, std::span<const std::uint32_t> queues,
                 std::span<const std::uint32_t> eligible, Rng& rng, Assignment& out) {
  auto& picks = tl_picks;
  std::visit(overloaded{
                 [&](const PowerOfD& p) {
                   sample_distinct(eligible, static_cast<std::size_t>(p.d), rng, picks);
                   join_shortest(picks, queues, rng, out);
                 },
                 [&](const Mjsq& p) {
                   if (rng.uniform() < p.r) {
                     sample_distinct(eligible, 1, rng, picks);
                     join_shortest(picks, queues, rng, out);
                   } else {
                     join_shortest(eligible, queues, rng, out);
                   }
                 },
                 [&](const Jiq& p) {
                   if (try_idle(queues, eligible, rng, picks, out)) return;
                   sample_distinct(eligible, static_cast<std::size_t>(p.d), rng, picks);
                   join_shortest(picks, queues, rng, out);
                 },
             },
             policy);
}

Assignment assign(const PolicySpec& policy, std::span<const std::uint32_t> queues,
                  std::span<const std::uint32_t> eligible, Rng& rng) {
  Assignment out;
  assign_into(policy, queues, eligible, rng, out);
  return out;
}

namespace {

constexpr std::size_t kNoRecord = std::numeric_limits<std::size_t>::max();

class Engine {
 public:
  Engine(const SimConfig& config, const SimOptions& options)
      : config_(config),
        options_(options),
        horizon_(config.horizon),
        arrivals_(stream_seed(config.seed, Stream::Arrivals)),
        thinning_(stream_seed(config.seed, Stream::Thinning)),
        actions_(stream_seed(config.seed, Stream::Actions)),
        sampling_(stream_seed(config.seed, Stream::Sampling)),
        service_(stream_seed(config.seed, Stream::Service)),
        delay_(stream_seed(config.seed, Stream::Delay)) {
    const auto n = static_cast<std::size_t>(config.n_servers);
    state_.queue_lengths.assign(n, 0);
    fifo_.resize(n);
    all_servers_.resize(n);
    std::iota(all_servers_.begin(), all_servers_.end(), 0u);
    level_count_.assign(1, static_cast<std::uint32_t>(n));
    level_last_.assign(1, 0.0);
    log_.config = config;
    log_.horizon = horizon_;
    log_.stats.occupancy_area.assign(1, 0.0);
    if (options_.keep_records) {
      const double expected = static_cast<double>(n) * peak_arrival_rate(config.arrival) * horizon_;
      log_.records.reserve(static_cast<std::size_t>(std::min(expected * 1.05 + 16.0, 5e8)));
    }
    if (is_group(config.design)) draw_partition();
  }

  EventLog run() {
    double next = next_arrival(0.0, config_.arrival, config_.n_servers, arrivals_, thinning_);
    for (;;) {
      const bool arrivals_left = next < horizon_;
      if (!arrivals_left && events_.empty()) break;
      // Departures and releases at the same instant as an arrival go first.
      if (!events_.empty() && (!arrivals_left || events_.top().time <= next)) {
        const Event ev = events_.top();
        events_.pop();
        advance(ev.time);
        if (ev.kind == Kind::Departure) {
          depart(ev.payload, ev.time);
        } else {
          release(ev.payload, ev.time);
        }
      } else {
        advance(next);
        arrive(next);
        next = next_arrival(next, config_.arrival, config_.n_servers, arrivals_, thinning_);
      }
      if (options_.observer) options_.observer(state_);
    }
    finish();
    return std::move(log_);
  }

 private:
  enum class Kind : std::uint8_t { Departure = 0, Release = 1 };

  struct Event {
    double time;
    Kind kind;
    std::uint64_t seq;
    std::size_t payload;
    bool operator>(const Event& o) const {
      if (time != o.time) return time > o.time;
      if (kind != o.kind) return kind > o.kind;
      return seq > o.seq;
    }
  };

  struct Job {
    double arrival;
    double service;
    std::size_t record;
  };

  struct Pending {
    double arrival = 0.0;
    int action = 0;
    std::size_t record = kNoRecord;
    bool jsq = false;
    std::vector<std::uint32_t> targets;
  };

  void draw_partition() {
    Rng rng(stream_seed(config_.seed, Stream::Partition));
    std::vector<std::uint32_t> perm = all_servers_;
    for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
    const auto half = perm.size() / 2;
    GroupPartition part;
    part[0].assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
    part[1].assign(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());
    std::sort(part[0].begin(), part[0].end());
    std::sort(part[1].begin(), part[1].end());
    log_.group_partition = std::move(part);
  }

  std::span<const std::uint32_t> eligible_for(int action) const {
    if (log_.group_partition) return (*log_.group_partition)[static_cast<std::size_t>(action)];
    return all_servers_;
  }

  int draw_action(double t) {
    return std::visit(overloaded{
                          [&](const Bernoulli&) { return choose_action(config_.treatment_prob, actions_); },
                          [&](const GroupDesign&) { return choose_action(config_.treatment_prob, actions_); },
                          [](const GlobalControl&) { return 0; },
                          [](const GlobalTreatment&) { return 1; },
                          [&](const Switchback& s) {
                            const auto window = static_cast<long long>(std::floor(t / s.window));
                            return static_cast<int>(window % 2 != 0);
                          },
                      },
                      config_.design);
  }

  void advance(double t) {
    const double dt = t - clock_;
    area_in_system_.add(static_cast<double>(in_system_) * dt);
    if (clock_ < horizon_) {
      const double dth = std::min(t, horizon_) - clock_;
      area_in_system_h_.add(static_cast<double>(in_system_) * dth);
      area_queued_h_.add(static_cast<double>(queued_) * dth);
    }
    clock_ = t;
    state_.clock = t;
  }

  void touch_level(std::size_t level, double t) {
    if (level >= level_count_.size()) {
      level_count_.resize(level + 1, 0);
      level_last_.resize(level + 1, t);
      log_.stats.occupancy_area.resize(level + 1, 0.0);
    }
    const double from = std::min(level_last_[level], horizon_);
    const double to = std::min(t, horizon_);
    log_.stats.occupancy_area[level] += static_cast<double>(level_count_[level]) * (to - from);
    level_last_[level] = t;
  }

  std::size_t new_record(double t, int action) {
    if (action == 1) {
      ++log_.n_treatment;
    } else {
      ++log_.n_control;
    }
    const std::uint64_t index = arrivals_seen_++;
    if (!options_.keep_records) return kNoRecord;
    TaskRecord r;
    r.index = index;
    r.arrival_time = t;
    r.action = action;
    log_.records.push_back(r);
    return log_.records.size() - 1;
  }

  void fill_record(std::size_t rec, const Assignment& a, double service, double delay, std::uint64_t backlog) {
    if (rec == kNoRecord) return;
    TaskRecord& r = log_.records[rec];
    r.assigned_server = a.server;
    r.assigned_queue = a.assigned_queue;
    r.service_duration = service;
    r.dispatcher_delay = delay;
    r.dispatcher_backlog = backlog;
    r.observed_offset = log_.observed_values.size();
    r.observed_count = static_cast<std::uint32_t>(a.observed.size());
    log_.observed_values.insert(log_.observed_values.end(), a.observed.begin(), a.observed.end());
  }

  void arrive(double t) {
    const int action = draw_action(t);
    const std::size_t rec = new_record(t, action);
    ++in_system_;
    const PolicySpec& policy = policy_for_arm(config_, action);
    const auto eligible = eligible_for(action);
    if (!config_.delay_enabled) {
      assign_into(policy, state_.queue_lengths, eligible, sampling_, scratch_);
      const double service = sample_service(service_for_arm(config_, action), scratch_.server, service_);
      fill_record(rec, scratch_, service, 0.0, 0);
      join(scratch_.server, Job{t, service, rec}, t);
      return;
    }

    // The probed servers are fixed on arrival; their reports arrive after
    // independent unit-rate exponential delays.
    const std::size_t slot = acquire_slot();
    Pending& p = pending_[slot];
    p.arrival = t;
    p.action = action;
    p.record = rec;
    p.jsq = false;
    std::visit(overloaded{
                   [&](const PowerOfD& pol) { sample_distinct(eligible, static_cast<std::size_t>(pol.d), sampling_, p.targets); },
                   [&](const Mjsq& pol) {
                     if (sampling_.uniform() < pol.r) {
                       sample_distinct(eligible, 1, sampling_, p.targets);
                     } else {
                       p.jsq = true;
                       p.targets.assign(eligible.begin(), eligible.end());
                     }
                   },
                   [&](const Jiq& pol) { sample_distinct(eligible, static_cast<std::size_t>(pol.d), sampling_, p.targets); },
               },
               policy);
    double delay = 0.0;
    for (std::size_t k = 0; k < p.targets.size(); ++k) delay = std::max(delay, delay_.exponential(1.0));
    if (rec != kNoRecord) {
      log_.records[rec].dispatcher_backlog = state_.dispatcher_backlog;
      log_.records[rec].dispatcher_delay = delay;
    }
    ++state_.dispatcher_backlog;
    events_.push(Event{t + delay, Kind::Release, seq_++, slot});
  }

  void release(std::size_t slot, double t) {
    Pending& p = pending_[slot];
    --state_.dispatcher_backlog;
    const auto eligible = eligible_for(p.action);
    const PolicySpec& policy = policy_for_arm(config_, p.action);
    const bool idle_branch = std::holds_alternative<Jiq>(policy) &&
                             try_idle(state_.queue_lengths, eligible, sampling_, idle_scratch_, scratch_);
    if (!idle_branch) join_shortest(p.targets, state_.queue_lengths, sampling_, scratch_);
    const double service = sample_service(service_for_arm(config_, p.action), scratch_.server, service_);
    double delay = t - p.arrival;
    std::uint64_t backlog = 0;
    if (p.record != kNoRecord) {
      delay = log_.records[p.record].dispatcher_delay;
      backlog = log_.records[p.record].dispatcher_backlog;
    }
    fill_record(p.record, scratch_, service, delay, backlog);
    join(scratch_.server, Job{p.arrival, service, p.record}, t);
    free_slots_.push_back(slot);
  }

  std::size_t acquire_slot() {
    if (!free_slots_.empty()) {
      const std::size_t s = free_slots_.back();
      free_slots_.pop_back();
      return s;
    }
    pending_.emplace_back();
    return pending_.size() - 1;
  }

  void join(std::uint32_t server, const Job& job, double t) {
    std::uint32_t& q = state_.queue_lengths[server];
    if (q == std::numeric_limits<std::uint32_t>::max()) {
      throw QueueOverflow("queue at server " + std::to_string(server + 1) +
                          " exceeded 2^32 jobs; the system is unstable");
    }
    touch_level(static_cast<std::size_t>(q) + 1, t);
    ++level_count_[static_cast<std::size_t>(q) + 1];
    ++q;
    ++queued_;
    log_.stats.max_queue_length = std::max(log_.stats.max_queue_length, q);
    fifo_[server].push_back(job);
    if (q == 1) events_.push(Event{t + job.service, Kind::Departure, seq_++, server});
  }

  void depart(std::size_t server, double t) {
    auto& line = fifo_[server];
    const Job job = line.front();
    line.pop_front();
    const double response = t - job.arrival;
    if (job.record != kNoRecord) log_.records[job.record].response_time = response;
    response_sum_.add(response);
    ++log_.stats.response_count;
    ++log_.stats.departures;

    std::uint32_t& q = state_.queue_lengths[server];
    touch_level(q, t);
    --level_count_[q];
    --q;
    --queued_;
    --in_system_;
    if (q > 0) events_.push(Event{t + line.front().service, Kind::Departure, seq_++, server});
  }

  void finish() {
    const double end = std::max(horizon_, clock_);
    advance(end);
    for (std::size_t i = 1; i < level_count_.size(); ++i) touch_level(i, horizon_);
    log_.stats.occupancy_area[0] = static_cast<double>(config_.n_servers) * horizon_;
    log_.emptied_at = end;
    log_.stats.area_in_system = area_in_system_.value();
    log_.stats.area_in_system_horizon = area_in_system_h_.value();
    log_.stats.area_queued_horizon = area_queued_h_.value();
    log_.stats.response_time_sum = response_sum_.value();
  }

  const SimConfig& config_;
  const SimOptions& options_;
  double horizon_;
  Rng arrivals_;
  Rng thinning_;
  Rng actions_;
  Rng sampling_;
  Rng service_;
  Rng delay_;

  EventLog log_;
  SystemState state_;
  std::vector<std::deque<Job>> fifo_;
  std::vector<std::uint32_t> all_servers_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::vector<Pending> pending_;
  std::vector<std::size_t> free_slots_;
  Assignment scratch_;
  std::vector<std::uint32_t> idle_scratch_;

  std::vector<std::uint32_t> level_count_;
  std::vector<double> level_last_;
  double clock_ = 0.0;
  std::uint64_t in_system_ = 0;
  std::uint64_t queued_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t arrivals_seen_ = 0;
  CompensatedSum area_in_system_;
  CompensatedSum area_in_system_h_;
  CompensatedSum area_queued_h_;
  CompensatedSum response_sum_;
};

}  // namespace

EventLog simulate(const SimConfig& config, const SimOptions& options) {
  validate(config);
  Engine engine(config, options);
  return engine.run();
}

EventLog simulate_with_delay(const SimConfig& config, const SimOptions& options) {
  return simulate(config, options);
}

}  // namespace dqsim
