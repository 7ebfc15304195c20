#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "dqsim/errors.hpp"
#include "dqsim/estimators.hpp"
#include "dqsim/numeric.hpp"
#include "dqsim/simulator.hpp"
#include "support.hpp"

using namespace dqsim;
using dqsim::test::small_config;

namespace {

std::vector<std::uint32_t> iota_servers(std::uint32_t n) {
  std::vector<std::uint32_t> v(n);
  std::iota(v.begin(), v.end(), 0u);
  return v;
}

bool same_records(const EventLog& a, const EventLog& b) {
  if (a.size() != b.size() || a.observed_values != b.observed_values) return false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const auto& x = a.records[j];
    const auto& y = b.records[j];
    if (x.arrival_time != y.arrival_time || x.action != y.action || x.assigned_server != y.assigned_server ||
        x.assigned_queue != y.assigned_queue || x.service_duration != y.service_duration ||
        x.response_time != y.response_time || x.dispatcher_delay != y.dispatcher_delay ||
        x.dispatcher_backlog != y.dispatcher_backlog)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("service laws") {
  Rng rng(3);
  SUBCASE("deterministic draws are exactly 1/mu") {
    const ServiceSpec s = DeterministicService{{2.0, 4.0}};
    CHECK(sample_service(s, 0, rng) == 0.5);
    CHECK(sample_service(s, 1, rng) == 0.25);
  }
  SUBCASE("pareto(4, 0.75) has mean 1 and support above the scale") {
    const ServiceSpec s = ParetoService{4.0, 0.75};
    CompensatedSum sum;
    double lo = 1e9;
    constexpr int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const double x = sample_service(s, 0, rng);
      lo = std::min(lo, x);
      sum.add(x);
    }
    CHECK(lo >= 0.75);
    // sd of the mean is sqrt(0.125 / n) ~ 3.5e-4
    CHECK(std::abs(sum.value() / n - 1.0) < 2e-3);
    CHECK(service_rates(s, 3) == std::vector<double>{1.0, 1.0, 1.0});
  }
  SUBCASE("exponential rates are per server") {
    const ServiceSpec s = ExponentialService{{1.0, 4.0}};
    CompensatedSum a, b;
    for (int i = 0; i < 200000; ++i) {
      a.add(sample_service(s, 0, rng));
      b.add(sample_service(s, 1, rng));
    }
    CHECK(a.value() / 200000 == doctest::Approx(1.0).epsilon(0.01));
    CHECK(b.value() / 200000 == doctest::Approx(0.25).epsilon(0.01));
  }
}

TEST_CASE("bernoulli actions follow p and are reproducible") {
  Rng a(9), b(9);
  int ones = 0;
  for (int i = 0; i < 100000; ++i) {
    const int x = choose_action(0.3, a);
    REQUIRE(x == choose_action(0.3, b));
    ones += x;
  }
  CHECK(std::abs(ones - 30000) < 700);
}

TEST_CASE("power-of-d samples distinct servers and joins the shortest") {
  Rng rng(11);
  const std::vector<std::uint32_t> queues{4, 0, 7, 2, 2, 9};
  const auto all = iota_servers(6);
  for (int rep = 0; rep < 2000; ++rep) {
    const Assignment a = assign(PowerOfD{3}, queues, all, rng);
    REQUIRE(a.observed.size() == 3);
    REQUIRE(a.assigned_queue == *std::min_element(a.observed.begin(), a.observed.end()));
    REQUIRE(queues[a.server] == a.assigned_queue);
  }
  // Sampling the full pool sees every queue.
  const Assignment full = assign(PowerOfD{6}, queues, all, rng);
  std::vector<std::uint32_t> seen = full.observed;
  std::sort(seen.begin(), seen.end());
  std::vector<std::uint32_t> want = queues;
  std::sort(want.begin(), want.end());
  CHECK(seen == want);
  CHECK(full.server == 1);
}

TEST_CASE("argmin ties are broken uniformly") {
  Rng rng(12);
  const std::vector<std::uint32_t> queues{1, 1, 1, 5};
  const auto all = iota_servers(4);
  std::map<std::uint32_t, int> picks;
  constexpr int n = 90000;
  for (int i = 0; i < n; ++i) ++picks[assign(Mjsq{0.0}, queues, all, rng).server];
  CHECK(picks.count(3) == 0);
  for (std::uint32_t s = 0; s < 3; ++s) CHECK(std::abs(picks[s] - n / 3) < 600);  // ~4.2 sd
}

TEST_CASE("MJSQ branches") {
  Rng rng(13);
  const std::vector<std::uint32_t> queues{3, 1, 4, 1, 5};
  const auto all = iota_servers(5);
  const Assignment jsq = assign(Mjsq{0.0}, queues, all, rng);
  CHECK(jsq.observed == queues);
  CHECK(jsq.assigned_queue == 1);
  const Assignment random = assign(Mjsq{1.0}, queues, all, rng);
  CHECK(random.observed.size() == 1);
  CHECK(random.assigned_queue == random.observed[0]);
  int full = 0;
  for (int i = 0; i < 20000; ++i) full += assign(Mjsq{0.4}, queues, all, rng).observed.size() == 5;
  CHECK(std::abs(full - 12000) < 350);
}

TEST_CASE("JIQ picks an idle server and observes one uniform server") {
  Rng rng(14);
  const std::vector<std::uint32_t> queues{0, 2, 5};
  const auto all = iota_servers(3);
  std::map<std::uint32_t, int> observed;
  for (int i = 0; i < 30000; ++i) {
    const Assignment a = assign(Jiq{2}, queues, all, rng);
    REQUIRE(a.server == 0);
    REQUIRE(a.assigned_queue == 0);
    REQUIRE(a.observed.size() == 1);
    ++observed[a.observed[0]];
  }
  for (std::uint32_t q : {0u, 2u, 5u}) CHECK(std::abs(observed[q] - 10000) < 450);

  SUBCASE("without idle servers it falls back to power-of-d") {
    const std::vector<std::uint32_t> busy{3, 1, 2};
    const Assignment a = assign(Jiq{3}, busy, all, rng);
    CHECK(a.observed.size() == 3);
    CHECK(a.server == 1);
    CHECK(a.assigned_queue == 1);
  }
}

TEST_CASE("hand-traced JIQ cost on a three-server state") {
  // Idle server 0 gets the job; the lone observation belongs to whichever
  // server was drawn, here forced to be the queue of length 5.
  SimConfig c = small_config(3);
  c.control_policy = Jiq{2};
  c.treatment_policy = Jiq{2};
  const EventLog log = test::make_log(c, {{.action = 0, .observed = {5}, .server = 0, .queue = 0}});
  const CostSeries costs = compute_costs(log, known_rates(c));
  CHECK(costs.cost_w[0] == 1.0);
  CHECK(costs.cost_q[0] == 5.0);
}

TEST_CASE("simulation is deterministic in the seed") {
  SimConfig c = small_config(10, 0.85, 500.0, 77);
  c.control_policy = Jiq{2};
  c.treatment_policy = Mjsq{0.4};
  const EventLog a = simulate(c);
  const EventLog b = simulate(c);
  CHECK(same_records(a, b));
  c.seed = 78;
  CHECK_FALSE(same_records(a, simulate(c)));
}

TEST_CASE("conservation and sample-path Little's law on drained runs") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    SimConfig c = small_config(8, 0.85, 2000.0, seed);
    c.control_policy = seed % 2 ? PolicySpec{PowerOfD{2}} : PolicySpec{Jiq{2}};
    c.treatment_policy = seed % 3 ? PolicySpec{Mjsq{0.3}} : PolicySpec{PowerOfD{1}};
    c.delay_enabled = seed == 5;
    const EventLog log = simulate(c);
    REQUIRE(log.emptied_at);
    CHECK(log.stats.departures == log.size());
    CHECK(log.n_control + log.n_treatment == log.size());
    CompensatedSum w;
    for (const auto& r : log.records) w.add(r.response_time);
    const double T = *log.emptied_at;
    const double L = log.stats.area_in_system / T;
    const double lw = static_cast<double>(log.size()) / T * (w.value() / static_cast<double>(log.size()));
    CHECK(std::abs(L - lw) <= 1e-9 * L);
  }
}

TEST_CASE("event log fields are consistent") {
  SimConfig c = small_config(6, 0.8, 1000.0, 5);
  const EventLog log = simulate(c);
  double last = 0.0;
  for (const auto& r : log.records) {
    REQUIRE(r.arrival_time >= last);
    REQUIRE(r.arrival_time < c.horizon);
    last = r.arrival_time;
    REQUIRE(r.response_time >= r.service_duration - 1e-9);
    REQUIRE(r.assigned_server < 6);
    REQUIRE(r.observed_count == (r.action ? 2u : 3u));
    REQUIRE(r.dispatcher_delay == 0.0);
  }
}

TEST_CASE("occupancy vector is monotone at every event epoch") {
  SimConfig c = small_config(10, 0.9, 300.0, 21);
  bool monotone = true;
  std::size_t events = 0;
  SimOptions opt;
  opt.observer = [&](const SystemState& s) {
    const auto occ = occupancy(s.queue_lengths);
    monotone = monotone && occ[0] == 1.0;
    for (std::size_t i = 1; i < occ.size(); ++i) monotone = monotone && occ[i] <= occ[i - 1];
    ++events;
  };
  simulate(c, opt);
  CHECK(events > 1000);
  CHECK(monotone);
}

TEST_CASE("designs") {
  SUBCASE("global designs fix the action") {
    SimConfig c = small_config(4, 0.7, 300.0);
    c.design = GlobalControl{};
    const EventLog a = simulate(c);
    CHECK(a.n_treatment == 0);
    c.design = GlobalTreatment{};
    const EventLog b = simulate(c);
    CHECK(b.n_control == 0);
  }
  SUBCASE("switchback starts in control and alternates") {
    SimConfig c = small_config(4, 0.7, 500.0);
    c.design = Switchback{50.0};
    const EventLog log = simulate(c);
    for (const auto& r : log.records) REQUIRE(r.action == static_cast<int>(std::floor(r.arrival_time / 50.0)) % 2);
    CHECK(log.n_control > 0);
    CHECK(log.n_treatment > 0);
  }
  SUBCASE("group design keeps each arm on its half") {
    SimConfig c = small_config(10, 0.8, 500.0);
    c.design = GroupDesign{};
    c.control_policy = PowerOfD{3};
    c.treatment_policy = Mjsq{0.2};
    const EventLog log = simulate(c);
    REQUIRE(log.group_partition);
    const auto& part = *log.group_partition;
    CHECK(part[0].size() == 5);
    CHECK(part[1].size() == 5);
    std::set<std::uint32_t> all(part[0].begin(), part[0].end());
    all.insert(part[1].begin(), part[1].end());
    CHECK(all.size() == 10);
    for (const auto& r : log.records) {
      const auto& half = part[static_cast<std::size_t>(r.action)];
      REQUIRE(std::binary_search(half.begin(), half.end(), r.assigned_server));
      if (r.action == 1 && r.observed_count > 1) REQUIRE(r.observed_count == 5);
    }
  }
  SUBCASE("group design needs an even server count") {
    SimConfig c = small_config(5);
    c.design = GroupDesign{};
    c.control_policy = PowerOfD{2};
    c.treatment_policy = PowerOfD{2};
    CHECK_THROWS_AS(simulate(c), ConfigInvalid);
  }
}

TEST_CASE("config validation") {
  SimConfig c = small_config(4);
  auto rejects = [](SimConfig bad) { CHECK_THROWS_AS(validate(bad), ConfigInvalid); };
  SimConfig bad = c;
  bad.treatment_prob = 0.0;
  rejects(bad);
  bad = c;
  bad.treatment_prob = 1.0;
  rejects(bad);
  bad = c;
  bad.control_policy = PowerOfD{5};
  rejects(bad);
  bad = c;
  bad.service = ParetoService{2.0, 0.5};
  rejects(bad);
  bad = c;
  bad.service = ExponentialService{{1.0, 1.0}};
  rejects(bad);
  bad = c;
  bad.arrival = SinusoidalArrival{0.1, 0.2};
  rejects(bad);
  bad = c;
  bad.horizon = 0.0;
  rejects(bad);
  bad = c;
  bad.n_servers = 0;
  rejects(bad);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("sinusoidal arrivals") {
  SUBCASE("zero amplitude reproduces constant-rate epochs") {
    SimConfig a = small_config(5, 0.9, 400.0, 3);
    SimConfig b = a;
    b.arrival = SinusoidalArrival{0.9, 0.0};
    CHECK(same_records(simulate(a), simulate(b)));
  }
  SUBCASE("the arrival count follows the integrated rate") {
    // Over [0, 2 pi k] the sine integrates to zero.
    SimConfig c = small_config(20, 0.9, 1000.0 * 2.0 * M_PI, 4);
    c.arrival = SinusoidalArrival{0.9, 0.15};
    const EventLog log = simulate(c);
    CHECK(estimate_lambda(log) == doctest::Approx(0.9).epsilon(0.01));
    // Arrivals concentrate where sin(t) > 0.
    std::size_t up = 0;
    for (const auto& r : log.records) up += std::sin(r.arrival_time) > 0;
    const double share = static_cast<double>(up) / static_cast<double>(log.size());
    // Expected share (0.9 pi + 0.3) / (1.8 pi) = 0.5531.
    CHECK(std::abs(share - (0.9 * M_PI + 0.3) / (1.8 * M_PI)) < 0.005);
  }
}

TEST_CASE("delay mode") {
  SimConfig c = small_config(10, 0.6, 5000.0, 8);
  c.delay_enabled = true;
  c.control_policy = PowerOfD{2};
  c.treatment_policy = PowerOfD{2};
  const EventLog log = simulate(c);
  CompensatedSum delay;
  bool ordered = true;
  for (const auto& r : log.records) {
    delay.add(r.dispatcher_delay);
    ordered = ordered && r.response_time >= r.dispatcher_delay + r.service_duration - 1e-9;
  }
  // Max of two unit exponentials has mean 1 + 1/2.
  const double n = static_cast<double>(log.size());
  CHECK(std::abs(delay.value() / n - 1.5) < 0.02);
  CHECK(ordered);
  // Backlog at the dispatcher averages N lambda E[delay] by Little's law.
  CompensatedSum backlog;
  for (const auto& r : log.records) backlog.add(static_cast<double>(r.dispatcher_backlog));
  CHECK(backlog.value() / n == doctest::Approx(10 * 0.6 * 1.5).epsilon(0.05));

  SUBCASE("MJSQ's shortest-queue branch waits for every server") {
    SimConfig m = small_config(5, 0.5, 2000.0, 9);
    m.delay_enabled = true;
    m.control_policy = Mjsq{0.0};
    m.treatment_policy = Mjsq{0.0};
    const EventLog ml = simulate(m);
    CompensatedSum d;
    for (const auto& r : ml.records) d.add(r.dispatcher_delay);
    // E[max of 5 unit exponentials] = 1 + 1/2 + 1/3 + 1/4 + 1/5.
    CHECK(d.value() / static_cast<double>(ml.size()) == doctest::Approx(137.0 / 60.0).epsilon(0.03));
  }
}

TEST_CASE("stable systems stay bounded") {
  for (PolicySpec p : {PolicySpec{PowerOfD{1}}, PolicySpec{Mjsq{0.6}}, PolicySpec{Jiq{2}}}) {
    SimConfig c = small_config(20, 0.9, 1e4, 2);
    c.control_policy = p;
    c.treatment_policy = p;
    SimOptions opt;
    opt.keep_records = false;
    const EventLog log = simulate(c, opt);
    CHECK(log.records.empty());
    const double mean_total = log.stats.area_in_system_horizon / c.horizon;
    CHECK(std::isfinite(mean_total));
    CHECK(mean_total < 20 * 20.0);
  }
}

TEST_CASE("M/M/1 occupancy and response time") {
  SimConfig c = small_config(1, 0.5, 2e4, 31);
  c.control_policy = PowerOfD{1};
  c.treatment_policy = PowerOfD{1};
  const EventLog log = simulate(c);
  CHECK(log.stats.area_in_system_horizon / c.horizon == doctest::Approx(1.0).epsilon(0.06));
  CHECK(log.stats.response_time_sum / static_cast<double>(log.stats.response_count) ==
        doctest::Approx(2.0).epsilon(0.06));
  // s_1 is the utilization.
  CHECK(log.stats.occupancy(1, 1, c.horizon) == doctest::Approx(0.5).epsilon(0.03));
}
