#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dqsim/event_log.hpp"

namespace dqsim {

// Service rates used to turn an observed queue length into an expected
// response time, one vector per arm (they differ only when the treatment
// changes the service law).
struct ServiceRates {
  std::vector<double> control;
  std::vector<double> treatment;
};

ServiceRates known_rates(const SimConfig& config);
ServiceRates same_rates(std::vector<double> rates);

struct CostSeries {
  std::vector<double> cost_w;  // (l_assigned + 1) / mu_assigned, plus dispatcher wait
  std::vector<double> cost_q;  // mean observed queue length, plus backlog / N
  bool delay_adjusted = false;
  std::size_t size() const { return cost_w.size(); }
};

CostSeries compute_costs(const EventLog& log, const ServiceRates& rates);

// Per-server arrival rate (n_C + n_T) / (N T).
double estimate_lambda(const EventLog& log);

struct MuEstimate {
  std::vector<double> rates;            // NaN where a server saw no jobs
  std::vector<std::uint32_t> missing;   // 0-based servers without samples
  // Throws EstimatorError(NoSamples) naming the first missing server.
  const std::vector<double>& require() const;
};

// mu_i = sum (l + 1) / sum w over the jobs routed to server i, using the
// realized response times.
MuEstimate estimate_mu(const EventLog& log);

// Truncated forward sums Q_j = sum_{k=0..L} c_{j+k} for the n - L tasks that
// have L successors. The long-run average cost is not subtracted; it cancels
// in every arm difference.
struct QSeries {
  std::size_t truncation = 0;
  std::vector<double> q;
  std::vector<double> w;
  std::size_t size() const { return q.size(); }
};

QSeries q_forward_sums(const CostSeries& costs, std::size_t truncation);

// Straightforward O(nL) sums, kept for cross-checking the sliding window.
std::vector<double> naive_forward_sums(std::span<const double> costs, std::size_t truncation);

// floor(30 N lambda).
std::size_t auto_truncation(int n_servers, double lambda);
std::size_t default_truncation(const EventLog& log);

struct EstimateReport {
  std::string estimator;
  double estimate = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  std::optional<double> alpha_hat;
  bool alpha_fallback = false;
  std::optional<double> lambda_hat;
  std::optional<std::vector<double>> mu_hat;
};

std::pair<double, double> confidence_interval(const EstimateReport& report, double level);

// Naive arm-mean difference of the response-time costs.
EstimateReport estimate_naive(const CostSeries& costs, const EventLog& log, double level = 0.95);

EstimateReport estimate_wdq(const QSeries& qs, const EventLog& log, double lambda_hat, double level = 0.95);
EstimateReport estimate_qdq(const QSeries& qs, const EventLog& log, double lambda_hat, double level = 0.95);

struct AlphaEstimate {
  double alpha = 1.0;
  bool fallback = false;
};

// Variance-minimizing weight of alpha Q_w + (1 - alpha) Q_q / lambda, from
// sample moments pooled over both arms. Falls back to alpha = 1 when the
// quadratic is degenerate.
AlphaEstimate estimate_alpha(const QSeries& qs, double lambda_hat);

// Per-task mixed Q values alpha Q_w + (1 - alpha) Q_q / lambda.
std::vector<double> mixed_q(const QSeries& qs, double lambda_hat, double alpha);

EstimateReport estimate_dq_mixed(const QSeries& qs, const EventLog& log, double lambda_hat,
                                 std::optional<double> forced_alpha = std::nullopt, double level = 0.95);

EstimateReport estimate_group(const CostSeries& costs, const EventLog& log, double level = 0.95);
EstimateReport estimate_switchback(const CostSeries& costs, const EventLog& log, double window,
                                   double level = 0.95);

enum class QTarget { Queue, Response, Mixed };
const char* to_string(QTarget target);

// Linear model of Q_j on an intercept and the last five queue-length costs.
struct RegressionFit {
  QTarget target = QTarget::Response;
  double intercept = 0.0;
  std::array<double, 5> coef{};  // coef[u] multiplies c_q[j - u]
  double predict(const CostSeries& costs, std::size_t j) const;
};

inline constexpr std::size_t kRegressionLags = 5;

// Least squares over j = 4 .. qs.size() - 1 with `values[j]` the target.
RegressionFit fit_q_regression(const CostSeries& costs, std::span<const double> values, QTarget target);

// Residual sum of squares of a fit over the same index range.
double regression_rss(const RegressionFit& fit, const CostSeries& costs, std::span<const double> values);

// Q values of the requested kind (Mixed uses the fitted alpha).
std::vector<double> target_values(const QSeries& qs, QTarget target, double lambda_hat);

EstimateReport estimate_dq_doubly_robust(const QSeries& qs, const CostSeries& costs, const EventLog& log,
                                         QTarget target, double lambda_hat,
                                         const std::optional<RegressionFit>& fit_override = std::nullopt,
                                         double level = 0.95);

}  // namespace dqsim
