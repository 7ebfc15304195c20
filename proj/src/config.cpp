#include "dqsim/config.hpp"

#include <cmath>
#include <string>

#include "dqsim/errors.hpp"
#include "dqsim/format.hpp"

namespace dqsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigInvalid(what);
}

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

void validate_rates(const std::vector<double>& rates, int n, const char* which) {
  require(static_cast<int>(rates.size()) == n,
          std::string(which) + ": rate vector has length " + std::to_string(rates.size()) +
              ", expected n_servers = " + std::to_string(n));
  for (double r : rates) require(positive_finite(r), std::string(which) + ": service rates must be > 0");
}

void validate_service(const ServiceSpec& spec, int n, const char* which) {
  std::visit(overloaded{
                 [&](const ExponentialService& s) { validate_rates(s.rates, n, which); },
                 [&](const DeterministicService& s) { validate_rates(s.rates, n, which); },
                 [&](const ParetoService& s) {
                   require(std::isfinite(s.shape) && s.shape > 2.0,
                           std::string(which) + ": Pareto shape must exceed 2 (finite variance)");
                   require(positive_finite(s.scale), std::string(which) + ": Pareto scale must be > 0");
                 },
             },
             spec);
}

void validate_policy(const PolicySpec& spec, int n, const char* which) {
  std::visit(overloaded{
                 [&](const PowerOfD& p) {
                   require(p.d >= 1 && p.d <= n, std::string(which) + ": power-of-d needs 1 <= d <= n_servers");
                 },
                 [&](const Mjsq& p) {
                   require(p.r >= 0.0 && p.r <= 1.0, std::string(which) + ": MJSQ needs r in [0, 1]");
                 },
                 [&](const Jiq& p) {
                   require(p.d >= 1 && p.d <= n, std::string(which) + ": JIQ-d needs 1 <= d <= n_servers");
                 },
             },
             spec);
}

}  // namespace

void validate(const SimConfig& c) {
  require(c.n_servers >= 1, "n_servers must be a positive integer");
  std::visit(overloaded{
                 [&](const ConstantArrival& a) { require(positive_finite(a.lambda), "arrival rate must be > 0"); },
                 [&](const SinusoidalArrival& a) {
                   require(positive_finite(a.base), "sinusoidal base rate must be > 0");
                   require(std::isfinite(a.amplitude) && a.amplitude >= 0.0, "sinusoidal amplitude must be >= 0");
                   require(a.base > a.amplitude, "sinusoidal base must exceed amplitude so the rate stays positive");
                 },
             },
             c.arrival);
  validate_service(c.service, c.n_servers, "service");
  if (c.treatment_service) validate_service(*c.treatment_service, c.n_servers, "treatment service");
  require(c.treatment_prob > 0.0 && c.treatment_prob < 1.0, "treatment probability p must lie in (0, 1)");
  require(positive_finite(c.horizon), "horizon T must be > 0");

  // Policies draw from the servers eligible for their arm, which is half the
  // system under the group design.
  int eligible = c.n_servers;
  if (is_group(c.design)) {
    require(c.n_servers >= 2 && c.n_servers % 2 == 0, "group design needs an even n_servers >= 2");
    eligible = c.n_servers / 2;
  }
  validate_policy(c.control_policy, eligible, "control policy");
  validate_policy(c.treatment_policy, eligible, "treatment policy");
  if (const auto* sw = std::get_if<Switchback>(&c.design)) {
    require(positive_finite(sw->window), "switchback window must be > 0");
  }
}

double mean_arrival_rate(const ArrivalSpec& spec) {
  return std::visit(overloaded{
                        [](const ConstantArrival& a) { return a.lambda; },
                        [](const SinusoidalArrival& a) { return a.base; },
                    },
                    spec);
}

double peak_arrival_rate(const ArrivalSpec& spec) {
  return std::visit(overloaded{
                        [](const ConstantArrival& a) { return a.lambda; },
                        [](const SinusoidalArrival& a) { return a.base + a.amplitude; },
                    },
                    spec);
}

std::vector<double> service_rates(const ServiceSpec& spec, int n_servers) {
  return std::visit(overloaded{
                        [](const ExponentialService& s) { return s.rates; },
                        [](const DeterministicService& s) { return s.rates; },
                        [&](const ParetoService& s) {
                          const double mean = s.shape * s.scale / (s.shape - 1.0);
                          return std::vector<double>(static_cast<std::size_t>(n_servers), 1.0 / mean);
                        },
                    },
                    spec);
}

const ServiceSpec& service_for_arm(const SimConfig& config, int action) {
  if (action == 1 && config.treatment_service) return *config.treatment_service;
  return config.service;
}

const PolicySpec& policy_for_arm(const SimConfig& config, int action) {
  return action == 1 ? config.treatment_policy : config.control_policy;
}

namespace {

std::string join_rates(const std::vector<double>& rates) {
  bool uniform = !rates.empty();
  for (double r : rates) uniform = uniform && r == rates.front();
  if (uniform) return format_exact(rates.front());
  std::string out;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (i) out += ',';
    out += format_exact(rates[i]);
  }
  return out;
}

}  // namespace

std::string to_string(const PolicySpec& policy) {
  return std::visit(overloaded{
                        [](const PowerOfD& p) { return "pod:" + std::to_string(p.d); },
                        [](const Mjsq& p) { return "mjsq:" + format_exact(p.r); },
                        [](const Jiq& p) { return "jiq:" + std::to_string(p.d); },
                    },
                    policy);
}

std::string to_string(const ServiceSpec& service) {
  return std::visit(overloaded{
                        [](const ExponentialService& s) { return "exp:" + join_rates(s.rates); },
                        [](const DeterministicService& s) { return "const:" + join_rates(s.rates); },
                        [](const ParetoService& s) {
                          return "pareto:" + format_exact(s.shape) + ":" + format_exact(s.scale);
                        },
                    },
                    service);
}

std::string to_string(const Design& design) {
  return std::visit(overloaded{
                        [](const Bernoulli&) { return std::string("bernoulli"); },
                        [](const GlobalControl&) { return std::string("global0"); },
                        [](const GlobalTreatment&) { return std::string("global1"); },
                        [](const GroupDesign&) { return std::string("group"); },
                        [](const Switchback& s) { return "switchback:" + format_exact(s.window); },
                    },
                    design);
}

}  // namespace dqsim
