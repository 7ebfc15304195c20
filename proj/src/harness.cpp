#include "dqsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "dqsim/errors.hpp"
#include "dqsim/format.hpp"
#include "dqsim/numeric.hpp"
#include "dqsim/simulator.hpp"

namespace dqsim {

namespace {

struct KindName {
  std::string_view name;
  EstimatorKind kind;
};

constexpr KindName kKinds[] = {
    {"naive", EstimatorKind::Naive},   {"qdq", EstimatorKind::QDq},       {"wdq", EstimatorKind::WDq},
    {"mixdq", EstimatorKind::MixDq},   {"group", EstimatorKind::Group},   {"qdq_dr", EstimatorKind::QDqDr},
    {"wdq_dr", EstimatorKind::WDqDr},  {"mixdq_dr", EstimatorKind::MixDqDr},
};

std::string_view kind_name(EstimatorKind kind) {
  if (kind == EstimatorKind::Switchback) return "sw";
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "?";
}

// Which simulated log an estimator reads: the plan's own design, a group
// split, or a switchback schedule.
std::string design_key(const EstimatorSpec& spec) {
  if (spec.kind == EstimatorKind::Group) return "group";
  if (spec.kind == EstimatorKind::Switchback) return "switchback:" + format_exact(spec.window);
  return "base";
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

constexpr std::uint64_t kGroundTruthControl = 0x67742d636f6e74ULL;
constexpr std::uint64_t kGroundTruthTreatment = 0x67742d74726561ULL;

}  // namespace

EstimatorSpec parse_estimator(std::string_view text) {
  text = trim(text);
  EstimatorSpec spec;
  if (const auto at = text.find('@'); at != std::string_view::npos) {
    try {
      spec.truncation = static_cast<std::size_t>(parse_uint(text.substr(at + 1)));
    } catch (const std::invalid_argument&) {
      throw ConfigInvalid("bad truncation in estimator '" + std::string(text) + "'");
    }
    text = text.substr(0, at);
  }
  if (text.starts_with("sw:")) {
    spec.kind = EstimatorKind::Switchback;
    try {
      spec.window = parse_double(text.substr(3));
    } catch (const std::invalid_argument&) {
      throw ConfigInvalid("bad switchback window in '" + std::string(text) + "'");
    }
    if (!(spec.window > 0.0)) throw ConfigInvalid("switchback window must be > 0");
  } else {
    const auto it = std::find_if(std::begin(kKinds), std::end(kKinds), [&](const KindName& k) { return k.name == text; });
    if (it == std::end(kKinds)) throw ConfigInvalid("unknown estimator '" + std::string(text) + "'");
    spec.kind = it->kind;
  }
  spec.label = canonical_label(spec);
  return spec;
}

std::vector<EstimatorSpec> parse_estimator_list(std::string_view text) {
  std::vector<EstimatorSpec> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!piece.empty()) out.push_back(parse_estimator(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigInvalid("estimator list is empty");
  return out;
}

std::string canonical_label(const EstimatorSpec& spec) {
  std::string label(kind_name(spec.kind));
  if (spec.kind == EstimatorKind::Switchback) label += ":" + format_exact(spec.window);
  if (spec.truncation) label += "@" + std::to_string(*spec.truncation);
  return label;
}

void validate(const ExperimentPlan& plan) {
  validate(plan.base);
  if (plan.replications < 1) throw ConfigInvalid("replications must be >= 1");
  if (plan.estimators.empty()) throw ConfigInvalid("estimator set is empty");
  if (!(plan.ci_level > 0.0 && plan.ci_level < 1.0)) throw ConfigInvalid("ci_level must lie in (0, 1)");
  if (const auto* c = std::get_if<ComputedTruth>(&plan.ground_truth)) {
    if (!(c->horizon > 0.0) || c->replications < 1) throw ConfigInvalid("ground-truth horizon and replications must be positive");
  }
  for (const auto& e : plan.estimators) {
    if (e.kind == EstimatorKind::Group && (plan.base.n_servers < 2 || plan.base.n_servers % 2 != 0)) {
      throw ConfigInvalid("group estimator needs an even n_servers");
    }
  }
}

std::size_t plan_truncation(const ExperimentPlan& plan) {
  if (plan.truncation) return *plan.truncation;
  return auto_truncation(plan.base.n_servers, mean_arrival_rate(plan.base.arrival));
}

std::vector<EstimateReport> estimate_log(const EventLog& log, std::span<const EstimatorSpec> specs,
                                         const EstimationContext& ctx) {
  ServiceRates rates;
  std::optional<std::vector<double>> mu_hat;
  if (ctx.mu == MuMode::Estimated) {
    mu_hat = estimate_mu(log).require();
    rates = same_rates(*mu_hat);
  } else {
    rates = known_rates(log.config);
  }
  const CostSeries costs = compute_costs(log, rates);
  const double lambda_hat = estimate_lambda(log);

  std::map<std::size_t, QSeries> qcache;
  auto qseries = [&](const EstimatorSpec& s) -> const QSeries& {
    const std::size_t L = s.truncation.value_or(ctx.truncation);
    auto it = qcache.find(L);
    if (it == qcache.end()) it = qcache.emplace(L, q_forward_sums(costs, L)).first;
    return it->second;
  };

  std::vector<EstimateReport> out;
  out.reserve(specs.size());
  for (const EstimatorSpec& s : specs) {
    const double level = ctx.ci_level;
    EstimateReport r;
    switch (s.kind) {
      case EstimatorKind::Naive: r = estimate_naive(costs, log, level); break;
      case EstimatorKind::Group: r = estimate_group(costs, log, level); break;
      case EstimatorKind::Switchback: r = estimate_switchback(costs, log, s.window, level); break;
      case EstimatorKind::QDq: r = estimate_qdq(qseries(s), log, lambda_hat, level); break;
      case EstimatorKind::WDq: r = estimate_wdq(qseries(s), log, lambda_hat, level); break;
      case EstimatorKind::MixDq: r = estimate_dq_mixed(qseries(s), log, lambda_hat, std::nullopt, level); break;
      case EstimatorKind::QDqDr:
        r = estimate_dq_doubly_robust(qseries(s), costs, log, QTarget::Queue, lambda_hat, std::nullopt, level);
        break;
      case EstimatorKind::WDqDr:
        r = estimate_dq_doubly_robust(qseries(s), costs, log, QTarget::Response, lambda_hat, std::nullopt, level);
        break;
      case EstimatorKind::MixDqDr:
        r = estimate_dq_doubly_robust(qseries(s), costs, log, QTarget::Mixed, lambda_hat, std::nullopt, level);
        break;
    }
    r.estimator = s.label.empty() ? canonical_label(s) : s.label;
    r.mu_hat = mu_hat;
    out.push_back(std::move(r));
  }
  return out;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::jthread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (first_error) std::rethrow_exception(first_error);
}

GroundTruth ground_truth_gte(const SimConfig& config, double horizon, std::size_t replications, std::size_t jobs) {
  validate(config);
  if (!(horizon > 0.0) || replications < 1) throw ConfigInvalid("ground truth needs horizon > 0 and replications >= 1");
  std::vector<double> control(replications), treatment(replications);
  const SimOptions options{.keep_records = false, .observer = {}};
  parallel_for(2 * replications, jobs, [&](std::size_t k) {
    const std::size_t r = k / 2;
    const bool treat = k % 2 == 1;
    SimConfig c = config;
    c.horizon = horizon;
    if (treat) {
      c.design = GlobalTreatment{};
    } else {
      c.design = GlobalControl{};
    }
    c.seed = derive_seed(derive_seed(config.seed, treat ? kGroundTruthTreatment : kGroundTruthControl), r);
    const EventLog log = simulate(c, options);
    const double w = log.stats.response_time_sum / static_cast<double>(log.stats.response_count);
    (treat ? treatment : control)[r] = w;
  });
  GroundTruth gt;
  gt.replications = replications;
  gt.control_mean = mean(control);
  gt.treatment_mean = mean(treatment);
  gt.value = gt.treatment_mean - gt.control_mean;
  const auto reps = static_cast<double>(replications);
  gt.se = std::sqrt(sample_variance(control) / reps + sample_variance(treatment) / reps);
  return gt;
}

std::uint64_t replication_seed(std::uint64_t root, std::size_t index) { return derive_seed(root, index); }

ReplicationResult run_replication(const ExperimentPlan& plan, std::size_t index) {
  ReplicationResult result;
  result.seed = replication_seed(plan.base.seed, index);
  result.reports.resize(plan.estimators.size());

  std::map<std::string, std::vector<std::size_t>> by_design;
  for (std::size_t e = 0; e < plan.estimators.size(); ++e) by_design[design_key(plan.estimators[e])].push_back(e);

  EstimationContext ctx{plan_truncation(plan), plan.mu, plan.ci_level};
  for (const auto& [key, members] : by_design) {
    SimConfig c = plan.base;
    c.seed = result.seed;
    if (key != "base") {
      c.seed = derive_seed(result.seed, fnv1a(key));
      const EstimatorSpec& s = plan.estimators[members.front()];
      if (s.kind == EstimatorKind::Group) {
        c.design = GroupDesign{};
      } else {
        c.design = Switchback{s.window};
      }
    }
    std::optional<EventLog> log;
    try {
      log = simulate(c);
    } catch (const std::exception& e) {
      for (std::size_t m : members)
        result.errors.push_back(plan.estimators[m].label + ": simulation failed: " + e.what());
      continue;
    }
    for (std::size_t m : members) {
      try {
        auto reports = estimate_log(*log, std::span(&plan.estimators[m], 1), ctx);
        result.reports[m] = std::move(reports.front());
      } catch (const std::exception& e) {
        result.errors.push_back(plan.estimators[m].label + ": " + e.what());
      }
    }
  }
  return result;
}

const EstimatorSummary& ReplicationSummary::at(std::string_view label) const {
  return estimators.at(index_of(label));
}

std::size_t ReplicationSummary::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < estimators.size(); ++i)
    if (estimators[i].label == label) return i;
  throw std::out_of_range("no estimator labelled '" + std::string(label) + "'");
}

ReplicationSummary summarize(std::span<const EstimatorSpec> specs, std::vector<ReplicationResult> runs,
                             double ground_truth, double gt_se) {
  ReplicationSummary s;
  s.ground_truth = ground_truth;
  s.gt_se = gt_se;
  s.replications = runs.size();
  for (const auto& r : runs) s.failed += r.failed();
  s.invalid = static_cast<double>(s.failed) > 0.1 * static_cast<double>(runs.size());
  for (std::size_t e = 0; e < specs.size(); ++e) {
    EstimatorSummary es;
    es.label = specs[e].label.empty() ? canonical_label(specs[e]) : specs[e].label;
    std::vector<double> values, sq_err;
    for (const auto& r : runs) {
      if (!r.reports[e]) continue;
      values.push_back(r.reports[e]->estimate);
      const double err = r.reports[e]->estimate - ground_truth;
      sq_err.push_back(err * err);
    }
    es.replications = values.size();
    if (!values.empty()) {
      es.mean = mean(values);
      es.mse = mean(sq_err);
      if (values.size() >= 2) es.std_dev = std::sqrt(sample_variance(values));
    }
    s.estimators.push_back(std::move(es));
  }
  s.runs = std::move(runs);
  return s;
}

ReplicationSummary run_experiment(const ExperimentPlan& plan, std::size_t jobs) {
  validate(plan);
  double gt = 0.0, gt_se = 0.0;
  if (const auto* sup = std::get_if<SuppliedTruth>(&plan.ground_truth)) {
    gt = sup->value;
    gt_se = sup->se;
  } else {
    const auto& comp = std::get<ComputedTruth>(plan.ground_truth);
    const GroundTruth g = ground_truth_gte(plan.base, comp.horizon, comp.replications, jobs);
    gt = g.value;
    gt_se = g.se;
  }
  std::vector<ReplicationResult> runs(plan.replications);
  parallel_for(plan.replications, jobs, [&](std::size_t i) { runs[i] = run_replication(plan, i); });
  return summarize(plan.estimators, std::move(runs), gt, gt_se);
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_9g(*v) : std::string(); }

}  // namespace

void write_summary_header(std::ostream& out) {
  out << "table,row,estimator,mean,std_dev,mse,ground_truth,gt_se,replications\n";
}

void write_summary_rows(std::ostream& out, std::string_view table, std::string_view row,
                        const ReplicationSummary& summary) {
  for (const auto& e : summary.estimators) {
    out << table << ',' << row << ',' << e.label << ',' << opt(e.mean) << ',' << opt(e.std_dev) << ','
        << opt(e.mse) << ',' << format_9g(summary.ground_truth) << ',' << format_9g(summary.gt_se) << ','
        << e.replications << '\n';
  }
}

void write_report_header(std::ostream& out) {
  out << "estimator,estimate,std_error,ci_low,ci_high,alpha_hat,lambda_hat\n";
}

void write_report_row(std::ostream& out, const EstimateReport& r) {
  out << r.estimator << ',' << format_9g(r.estimate) << ',' << format_9g(r.std_error) << ',' << format_9g(r.ci_low)
      << ',' << format_9g(r.ci_high) << ',' << opt(r.alpha_hat) << ',' << opt(r.lambda_hat) << '\n';
}

}  // namespace dqsim
