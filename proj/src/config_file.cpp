#include "dqsim/config_file.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dqsim/errors.hpp"
#include "dqsim/estimators.hpp"
#include "dqsim/format.hpp"

namespace dqsim {

namespace {

constexpr std::string_view kKeys[] = {
    "n_servers", "lambda", "lambda_base", "lambda_amp", "service", "service_treatment", "policy_control",
    "policy_treatment", "p", "horizon", "truncation", "design", "delay", "seed", "replications",
    "ground_truth", "ground_truth_horizon", "ground_truth_replications", "estimators", "mu", "ci_level",
    "table", "scale",
};

struct Entry {
  std::string value;
  std::size_t line = 0;
};

std::vector<double> parse_rate_list(std::string_view text, int n) {
  std::vector<double> rates;
  std::size_t start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    rates.push_back(parse_double(trim(text.substr(start, comma == std::string_view::npos ? comma : comma - start))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (rates.size() == 1 && n > 1) rates.assign(static_cast<std::size_t>(n), rates.front());
  return rates;
}

int parse_small_int(std::string_view text) {
  const long long v = parse_int(text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw std::invalid_argument("integer out of range");
  return static_cast<int>(v);
}

class Entries {
 public:
  explicit Entries(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.contains(key); }

  // Applies `fn` to the value of `key` if present, converting parse
  // failures into ParseError at that key's line.
  template <class F>
  void with(const std::string& key, F&& fn) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return;
    try {
      fn(std::string_view(it->second.value));
    } catch (const std::invalid_argument& e) {
      throw ParseError(it->second.line, "bad value for '" + key + "': " + it->second.value);
    } catch (const ConfigInvalid& e) {
      throw ParseError(it->second.line, e.what());
    }
  }

 private:
  std::map<std::string, Entry> entries_;
};

bool parse_switch(std::string_view v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw std::invalid_argument("expected on/off");
}

}  // namespace

PolicySpec parse_policy(std::string_view text) {
  text = trim(text);
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("policy needs a parameter");
  const auto kind = text.substr(0, colon);
  const auto arg = text.substr(colon + 1);
  if (kind == "pod") return PowerOfD{parse_small_int(arg)};
  if (kind == "mjsq") return Mjsq{parse_double(arg)};
  if (kind == "jiq") return Jiq{parse_small_int(arg)};
  throw std::invalid_argument("unknown policy");
}

ServiceSpec parse_service(std::string_view text, int n_servers) {
  text = trim(text);
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("service needs parameters");
  const auto kind = text.substr(0, colon);
  const auto arg = text.substr(colon + 1);
  if (kind == "exp") return ExponentialService{parse_rate_list(arg, n_servers)};
  if (kind == "const") return DeterministicService{parse_rate_list(arg, n_servers)};
  if (kind == "pareto") {
    const auto second = arg.find(':');
    if (second == std::string_view::npos) throw std::invalid_argument("pareto needs shape:scale");
    return ParetoService{parse_double(arg.substr(0, second)), parse_double(arg.substr(second + 1))};
  }
  throw std::invalid_argument("unknown service law");
}

Design parse_design(std::string_view text) {
  text = trim(text);
  if (text == "bernoulli") return Bernoulli{};
  if (text == "global0") return GlobalControl{};
  if (text == "global1") return GlobalTreatment{};
  if (text == "group") return GroupDesign{};
  if (text.starts_with("switchback:")) return Switchback{parse_double(text.substr(11))};
  throw std::invalid_argument("unknown design");
}

ParsedConfig parse_config(std::string_view text) {
  std::map<std::string, Entry> raw;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
      throw ParseError(line_no, "unknown key '" + key + "'");
    if (value.empty()) throw ParseError(line_no, "empty value for '" + key + "'");
    if (!raw.emplace(key, Entry{value, line_no}).second) throw ParseError(line_no, "repeated key '" + key + "'");
  }
  const Entries e(std::move(raw));

  ParsedConfig out;
  e.with("table", [&](std::string_view v) { out.table = parse_small_int(v); });
  e.with("scale", [&](std::string_view v) { out.scale = parse_double(v); });
  if (out.table) {
    for (std::string_view k : kKeys) {
      if (k != "table" && k != "scale" && k != "seed" && e.has(std::string(k)))
        throw ConfigInvalid("table files accept only table, scale and seed; found '" + std::string(k) + "'");
    }
    e.with("seed", [&](std::string_view v) { out.sim.seed = parse_uint(v); });
    out.plan.base = out.sim;
    return out;
  }

  SimConfig& c = out.sim;
  if (!e.has("n_servers")) throw ConfigInvalid("n_servers is required");
  if (!e.has("policy_control") || !e.has("policy_treatment"))
    throw ConfigInvalid("policy_control and policy_treatment are required");
  e.with("n_servers", [&](std::string_view v) { c.n_servers = parse_small_int(v); });
  if (c.n_servers < 1) throw ConfigInvalid("n_servers must be >= 1");

  if (e.has("lambda") && (e.has("lambda_base") || e.has("lambda_amp")))
    throw ConfigInvalid("use either lambda or lambda_base/lambda_amp, not both");
  if (e.has("lambda_base") || e.has("lambda_amp")) {
    SinusoidalArrival s;
    e.with("lambda_base", [&](std::string_view v) { s.base = parse_double(v); });
    e.with("lambda_amp", [&](std::string_view v) { s.amplitude = parse_double(v); });
    c.arrival = s;
  } else {
    ConstantArrival a;
    e.with("lambda", [&](std::string_view v) { a.lambda = parse_double(v); });
    c.arrival = a;
  }
  c.service = ExponentialService{std::vector<double>(static_cast<std::size_t>(c.n_servers), 1.0)};
  e.with("service", [&](std::string_view v) { c.service = parse_service(v, c.n_servers); });
  e.with("service_treatment", [&](std::string_view v) { c.treatment_service = parse_service(v, c.n_servers); });
  e.with("policy_control", [&](std::string_view v) { c.control_policy = parse_policy(v); });
  e.with("policy_treatment", [&](std::string_view v) { c.treatment_policy = parse_policy(v); });
  e.with("p", [&](std::string_view v) { c.treatment_prob = parse_double(v); });
  e.with("horizon", [&](std::string_view v) { c.horizon = parse_double(v); });
  e.with("design", [&](std::string_view v) { c.design = parse_design(v); });
  e.with("delay", [&](std::string_view v) { c.delay_enabled = parse_switch(v); });
  e.with("seed", [&](std::string_view v) { c.seed = parse_uint(v); });
  validate(c);

  ExperimentPlan& plan = out.plan;
  plan.base = c;
  plan.estimators = parse_estimator_list("naive,qdq,wdq,mixdq");
  e.with("estimators", [&](std::string_view v) { plan.estimators = parse_estimator_list(v); });
  e.with("replications", [&](std::string_view v) { plan.replications = parse_uint(v); });
  e.with("truncation", [&](std::string_view v) {
    if (v != "auto") plan.truncation = parse_uint(v);
  });
  if (!plan.truncation) plan.truncation = auto_truncation(c.n_servers, mean_arrival_rate(c.arrival));
  e.with("mu", [&](std::string_view v) {
    if (v == "known") {
      plan.mu = MuMode::Known;
    } else if (v == "estimated") {
      plan.mu = MuMode::Estimated;
    } else {
      throw std::invalid_argument("expected known or estimated");
    }
  });
  e.with("ci_level", [&](std::string_view v) { plan.ci_level = parse_double(v); });

  ComputedTruth computed{c.horizon, 10};
  e.with("ground_truth_horizon", [&](std::string_view v) { computed.horizon = parse_double(v); });
  e.with("ground_truth_replications", [&](std::string_view v) { computed.replications = parse_uint(v); });
  plan.ground_truth = computed;
  e.with("ground_truth", [&](std::string_view v) {
    if (v != "compute") plan.ground_truth = SuppliedTruth{parse_double(v), 0.0};
  });
  if (std::holds_alternative<SuppliedTruth>(plan.ground_truth) &&
      (e.has("ground_truth_horizon") || e.has("ground_truth_replications")))
    throw ConfigInvalid("ground_truth_horizon/replications only apply to ground_truth = compute");
  validate(plan);
  return out;
}

ParsedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string format_sim_config(const SimConfig& c) {
  std::ostringstream out;
  out << "n_servers = " << c.n_servers << '\n';
  if (const auto* s = std::get_if<SinusoidalArrival>(&c.arrival)) {
    out << "lambda_base = " << format_exact(s->base) << '\n';
    out << "lambda_amp = " << format_exact(s->amplitude) << '\n';
  } else {
    out << "lambda = " << format_exact(std::get<ConstantArrival>(c.arrival).lambda) << '\n';
  }
  out << "service = " << to_string(c.service) << '\n';
  if (c.treatment_service) out << "service_treatment = " << to_string(*c.treatment_service) << '\n';
  out << "policy_control = " << to_string(c.control_policy) << '\n';
  out << "policy_treatment = " << to_string(c.treatment_policy) << '\n';
  out << "p = " << format_exact(c.treatment_prob) << '\n';
  out << "horizon = " << format_exact(c.horizon) << '\n';
  out << "design = " << to_string(c.design) << '\n';
  out << "delay = " << (c.delay_enabled ? "on" : "off") << '\n';
  out << "seed = " << c.seed << '\n';
  return out.str();
}

}  // namespace dqsim
