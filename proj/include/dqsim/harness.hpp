#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dqsim/config.hpp"
#include "dqsim/estimators.hpp"

namespace dqsim {

enum class EstimatorKind { Naive, QDq, WDq, MixDq, Group, Switchback, QDqDr, WDqDr, MixDqDr };

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::Naive;
  std::optional<std::size_t> truncation;  // plan truncation when unset
  double window = 0.0;                    // switchback only
  std::string label;
};

// Accepts naive, qdq, wdq, mixdq, group, sw:<window>, qdq_dr, wdq_dr,
// mixdq_dr, each optionally suffixed with @<L>.
EstimatorSpec parse_estimator(std::string_view text);
std::vector<EstimatorSpec> parse_estimator_list(std::string_view text);
std::string canonical_label(const EstimatorSpec& spec);

enum class MuMode { Known, Estimated };

struct SuppliedTruth {
  double value = 0.0;
  double se = 0.0;
};
struct ComputedTruth {
  double horizon = 1e6;
  std::size_t replications = 10;
};
using GroundTruthSpec = std::variant<SuppliedTruth, ComputedTruth>;

struct ExperimentPlan {
  SimConfig base;
  std::size_t replications = 100;
  std::vector<EstimatorSpec> estimators;
  GroundTruthSpec ground_truth = ComputedTruth{};
  std::optional<std::size_t> truncation;  // floor(30 N lambda) when unset
  MuMode mu = MuMode::Known;
  double ci_level = 0.95;
};

void validate(const ExperimentPlan& plan);
std::size_t plan_truncation(const ExperimentPlan& plan);

struct EstimationContext {
  std::size_t truncation = 0;
  MuMode mu = MuMode::Known;
  double ci_level = 0.95;
};

// Evaluates each spec against `log`. Costs and Q sums are computed once per
// distinct truncation. Throws the first estimator error.
std::vector<EstimateReport> estimate_log(const EventLog& log, std::span<const EstimatorSpec> specs,
                                         const EstimationContext& ctx);

struct GroundTruth {
  double value = 0.0;
  double se = 0.0;
  double control_mean = 0.0;
  double treatment_mean = 0.0;
  std::size_t replications = 0;
};

// Mean realized response time under global treatment minus global control,
// from independent runs of length `horizon` with split seeds.
GroundTruth ground_truth_gte(const SimConfig& config, double horizon, std::size_t replications,
                             std::size_t jobs = 0);

struct ReplicationResult {
  std::uint64_t seed = 0;
  std::vector<std::optional<EstimateReport>> reports;  // parallel to plan.estimators
  std::vector<std::string> errors;
  bool failed() const { return !errors.empty(); }
};

struct EstimatorSummary {
  std::string label;
  std::optional<double> mean;
  std::optional<double> std_dev;  // missing for a single replication
  std::optional<double> mse;
  std::size_t replications = 0;
};

struct ReplicationSummary {
  std::vector<EstimatorSummary> estimators;
  double ground_truth = 0.0;
  double gt_se = 0.0;
  std::size_t replications = 0;
  std::size_t failed = 0;
  bool invalid = false;  // more than 10% of replications failed
  std::vector<ReplicationResult> runs;

  const EstimatorSummary& at(std::string_view label) const;
  std::size_t index_of(std::string_view label) const;
};

// Aggregates per-replication estimates in replication order, so the output
// does not depend on how replications were scheduled.
ReplicationSummary summarize(std::span<const EstimatorSpec> specs, std::vector<ReplicationResult> runs,
                             double ground_truth, double gt_se);

// jobs = 0 uses every hardware thread; results do not depend on it.
ReplicationSummary run_experiment(const ExperimentPlan& plan, std::size_t jobs = 0);

// Executes replication `index` of `plan` in isolation.
ReplicationResult run_replication(const ExperimentPlan& plan, std::size_t index);

std::uint64_t replication_seed(std::uint64_t root, std::size_t index);

void write_summary_header(std::ostream& out);
void write_summary_rows(std::ostream& out, std::string_view table, std::string_view row,
                        const ReplicationSummary& summary);

void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, const EstimateReport& report);

// Runs fn(i) for i in [0, n) over `jobs` threads pulling from a shared counter.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace dqsim
