#include "dqsim/tables.hpp"

#include <cmath>

#include "dqsim/errors.hpp"
#include "dqsim/estimators.hpp"
#include "dqsim/format.hpp"
#include "dqsim/rng.hpp"

namespace dqsim {

namespace {

constexpr int kServers = 20;

const std::vector<double> kFullRange{0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95};

std::vector<double> heterogeneous_rates() {
  std::vector<double> rates;
  for (int i = 0; i < kServers; ++i) rates.push_back((90.0 + i) / 100.0);
  return rates;
}

std::vector<double> unit_rates() { return std::vector<double>(kServers, 1.0); }

struct Scaled {
  double horizon;
  std::size_t replications;
};

Scaled scaled(double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigInvalid("scale must lie in (0, 1]");
  const auto reps = static_cast<std::size_t>(std::ceil(100.0 * scale - 1e-9));
  return {1e6 * scale, std::max<std::size_t>(10, reps)};
}

std::string lambda_label(double lambda) { return "lambda=" + format_exact(lambda); }

}  // namespace

std::vector<TableRow> table_plans(int id, double scale, std::uint64_t seed) {
  if (id < 1 || id > kTableCount) throw UnknownTable("no table " + std::to_string(id) + "; expected 1.." + std::to_string(kTableCount));
  const Scaled sc = scaled(scale);

  struct Setup {
    std::vector<double> lambdas;
    ServiceSpec service = ExponentialService{unit_rates()};
    PolicySpec control = PowerOfD{3};
    PolicySpec treatment = PowerOfD{2};
    std::string estimators = "naive,qdq,wdq,mixdq";
    bool delay = false;
    bool sinusoid = false;
  } s;

  switch (id) {
    case 1: s.lambdas = {0.7, 0.8, 0.85, 0.9, 0.95}; break;
    case 2:
      s.lambdas = {0.85, 0.9, 0.95};
      s.service = ExponentialService{heterogeneous_rates()};
      s.estimators = "naive,group,qdq,wdq,mixdq";
      break;
    case 3:
      s.lambdas = {0.9};
      s.sinusoid = true;
      break;
    case 4:
      s.lambdas = {0.9};
      s.sinusoid = true;
      s.estimators = "mixdq,sw:10,sw:50,sw:100";
      break;
    case 5:
      s.lambdas = kFullRange;
      s.delay = true;
      break;
    case 6:
      s.lambdas = {0.85, 0.9, 0.95};
      s.service = DeterministicService{unit_rates()};
      break;
    case 7:
      s.lambdas = {0.9, 0.95};
      s.service = ParetoService{4.0, 0.75};
      break;
    case 8: {
      s.lambdas = {0.9};
      std::string list = "naive";
      for (int k : {10, 30, 60, 100}) {
        const auto L = auto_truncation(kServers, 0.9) * k / 30;
        for (const char* e : {"qdq", "wdq", "mixdq"}) list += std::string(",") + e + "@" + std::to_string(L);
      }
      s.estimators = list;
      break;
    }
    case 9:
      s.lambdas = kFullRange;
      s.control = PowerOfD{5};
      s.treatment = PowerOfD{3};
      break;
    case 10:
      s.lambdas = kFullRange;
      s.estimators = "qdq,qdq_dr,wdq,wdq_dr,mixdq,mixdq_dr";
      break;
    case 11:
      s.lambdas = kFullRange;
      s.control = Mjsq{0.4};
      s.treatment = Mjsq{0.6};
      break;
    case 12:
      s.lambdas = kFullRange;
      s.control = Mjsq{0.95};
      s.treatment = PowerOfD{1};
      break;
    case 13:
      s.lambdas = kFullRange;
      s.control = Jiq{2};
      s.treatment = Mjsq{0.4};
      break;
  }

  std::vector<TableRow> rows;
  for (std::size_t r = 0; r < s.lambdas.size(); ++r) {
    const double lambda = s.lambdas[r];
    SimConfig c;
    c.n_servers = kServers;
    if (s.sinusoid) {
      c.arrival = SinusoidalArrival{lambda, 0.15};
    } else {
      c.arrival = ConstantArrival{lambda};
    }
    c.service = s.service;
    c.control_policy = s.control;
    c.treatment_policy = s.treatment;
    c.treatment_prob = 0.5;
    c.horizon = sc.horizon;
    c.delay_enabled = s.delay;
    c.seed = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(id)), r);

    ExperimentPlan plan;
    plan.base = c;
    plan.replications = sc.replications;
    plan.estimators = parse_estimator_list(s.estimators);
    plan.ground_truth = ComputedTruth{sc.horizon, sc.replications};
    plan.truncation = auto_truncation(kServers, lambda);
    validate(plan);
    rows.push_back({s.sinusoid ? "lambda=0.9+0.15sin(t)" : lambda_label(lambda), std::move(plan)});
  }
  return rows;
}

TableResult reproduce_table(int id, double scale, std::uint64_t seed, std::size_t jobs) {
  TableResult out;
  out.id = id;
  for (auto& row : table_plans(id, scale, seed)) {
    out.labels.push_back(row.label);
    out.rows.push_back(run_experiment(row.plan, jobs));
  }
  return out;
}

void write_table(std::ostream& out, const TableResult& result) {
  write_summary_header(out);
  for (std::size_t r = 0; r < result.rows.size(); ++r)
    write_summary_rows(out, std::to_string(result.id), result.labels[r], result.rows[r]);
}

}  // namespace dqsim
