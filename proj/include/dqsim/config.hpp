#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dqsim {

// Arrival rates are per server; the dispatcher sees N times the rate.
struct ConstantArrival {
  double lambda = 0.9;
};

// lambda(t) = base + amplitude * sin(t), phase fixed at zero.
struct SinusoidalArrival {
  double base = 0.9;
  double amplitude = 0.0;
};

using ArrivalSpec = std::variant<ConstantArrival, SinusoidalArrival>;

struct ExponentialService {
  std::vector<double> rates;
};

// Every job at server i takes exactly 1 / rates[i].
struct DeterministicService {
  std::vector<double> rates;
};

// P(X > x) = (scale / x)^shape for x > scale.
struct ParetoService {
  double shape = 4.0;
  double scale = 0.75;
};

using ServiceSpec = std::variant<ExponentialService, DeterministicService, ParetoService>;

struct PowerOfD {
  int d = 2;
};

// Random server with probability r, otherwise join the shortest queue.
struct Mjsq {
  double r = 0.5;
};

// Idle server if one exists, otherwise power-of-d.
struct Jiq {
  int d = 2;
};

using PolicySpec = std::variant<PowerOfD, Mjsq, Jiq>;

struct Bernoulli {};
struct GlobalControl {};
struct GlobalTreatment {};
struct GroupDesign {};
struct Switchback {
  double window = 100.0;
};

using Design = std::variant<Bernoulli, GlobalControl, GlobalTreatment, GroupDesign, Switchback>;

struct SimConfig {
  int n_servers = 0;
  ArrivalSpec arrival = ConstantArrival{};
  ServiceSpec service = ExponentialService{};
  // Service law for treatment-arm jobs; the control law applies when unset.
  std::optional<ServiceSpec> treatment_service;
  PolicySpec control_policy = PowerOfD{3};
  PolicySpec treatment_policy = PowerOfD{2};
  double treatment_prob = 0.5;
  double horizon = 1e6;
  Design design = Bernoulli{};
  bool delay_enabled = false;
  std::uint64_t seed = 1;
};

// Throws ConfigInvalid naming the first violated invariant.
void validate(const SimConfig& config);

// Per-server arrival rate averaged over time (the base rate for sinusoids).
double mean_arrival_rate(const ArrivalSpec& spec);
double peak_arrival_rate(const ArrivalSpec& spec);

// Per-server service rates 1/E[S_i]; length n_servers.
std::vector<double> service_rates(const ServiceSpec& spec, int n_servers);

const ServiceSpec& service_for_arm(const SimConfig& config, int action);
const PolicySpec& policy_for_arm(const SimConfig& config, int action);

std::string to_string(const PolicySpec& policy);
std::string to_string(const ServiceSpec& service);
std::string to_string(const Design& design);

inline bool is_group(const Design& d) { return std::holds_alternative<GroupDesign>(d); }

}  // namespace dqsim
