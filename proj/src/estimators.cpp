#include "dqsim/estimators.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "dqsim/errors.hpp"
#include "dqsim/numeric.hpp"

namespace dqsim {

ServiceRates known_rates(const SimConfig& config) {
  ServiceRates r;
  r.control = service_rates(config.service, config.n_servers);
  r.treatment = service_rates(service_for_arm(config, 1), config.n_servers);
  return r;
}

ServiceRates same_rates(std::vector<double> rates) { return ServiceRates{rates, rates}; }

CostSeries compute_costs(const EventLog& log, const ServiceRates& rates) {
  const auto n = log.size();
  const double n_servers = static_cast<double>(log.n_servers());
  CostSeries out;
  out.delay_adjusted = log.config.delay_enabled;
  out.cost_w.resize(n);
  out.cost_q.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const TaskRecord& r = log.records[j];
    const auto obs = log.observed(r);
    if (obs.empty()) {
      throw EstimatorError(EstimatorErrc::MissingObservation, "record " + std::to_string(j) + " has no observation");
    }
    const auto& mu = r.action == 1 ? rates.treatment : rates.control;
    double cw = (static_cast<double>(r.assigned_queue) + 1.0) / mu[r.assigned_server];
    std::uint64_t total = 0;
    for (auto q : obs) total += q;
    double cq = static_cast<double>(total) / static_cast<double>(obs.size());
    if (out.delay_adjusted) {
      cw += r.dispatcher_delay;
      cq += static_cast<double>(r.dispatcher_backlog) / n_servers;
    }
    out.cost_w[j] = cw;
    out.cost_q[j] = cq;
  }
  return out;
}

double estimate_lambda(const EventLog& log) {
  if (!(log.horizon > 0.0)) throw ConfigInvalid("estimate_lambda: horizon must be > 0");
  return static_cast<double>(log.n_control + log.n_treatment) /
         (static_cast<double>(log.n_servers()) * log.horizon);
}

const std::vector<double>& MuEstimate::require() const {
  if (!missing.empty()) {
    throw EstimatorError(EstimatorErrc::NoSamples, "server " + std::to_string(missing.front() + 1) + " received no jobs");
  }
  return rates;
}

MuEstimate estimate_mu(const EventLog& log) {
  const auto n = static_cast<std::size_t>(log.n_servers());
  std::vector<CompensatedSum> work(n), time(n);
  std::vector<std::size_t> count(n, 0);
  for (const TaskRecord& r : log.records) {
    work[r.assigned_server].add(static_cast<double>(r.assigned_queue) + 1.0);
    // Dispatcher wait is not service-side time.
    time[r.assigned_server].add(r.response_time - r.dispatcher_delay);
    ++count[r.assigned_server];
  }
  MuEstimate out;
  out.rates.assign(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] == 0) {
      out.missing.push_back(static_cast<std::uint32_t>(i));
      continue;
    }
    out.rates[i] = work[i].value() / time[i].value();
  }
  return out;
}

namespace {

std::vector<double> sliding_sums(std::span<const double> c, std::size_t L) {
  const std::size_t n = c.size();
  if (L >= n) {
    throw EstimatorError(EstimatorErrc::TruncationTooLong,
                         "truncation " + std::to_string(L) + " needs more than " + std::to_string(n) + " tasks");
  }
  std::vector<double> out(n - L);
  if (L == 0) {
    out.assign(c.begin(), c.end());
    return out;
  }
  CompensatedSum s;
  for (std::size_t k = 0; k <= L; ++k) s.add(c[k]);
  out[0] = s.value();
  for (std::size_t j = 1; j < out.size(); ++j) {
    s.add(c[j + L]);
    s.add(-c[j - 1]);
    out[j] = s.value();
  }
  return out;
}

struct ArmMeans {
  double treatment = 0.0;
  double control = 0.0;
  std::size_t n_treatment = 0;
  std::size_t n_control = 0;
  double difference() const { return treatment - control; }
};

// Means of values[j] split by the action of record j.
ArmMeans arm_means(std::span<const double> values, const EventLog& log, std::size_t first = 0) {
  CompensatedSum st, sc;
  ArmMeans m;
  for (std::size_t j = first; j < values.size(); ++j) {
    if (log.records[j].action == 1) {
      st.add(values[j]);
      ++m.n_treatment;
    } else {
      sc.add(values[j]);
      ++m.n_control;
    }
  }
  if (m.n_treatment == 0 || m.n_control == 0) {
    throw EstimatorError(EstimatorErrc::ArmEmpty, "an arm has no eligible tasks");
  }
  m.treatment = st.value() / static_cast<double>(m.n_treatment);
  m.control = sc.value() / static_cast<double>(m.n_control);
  return m;
}

// Two-sample standard error sqrt(Var_C / n_C + Var_T / n_T).
double two_sample_se(std::span<const double> values, const std::vector<int>& arm_of) {
  std::vector<double> t, c;
  for (std::size_t j = 0; j < values.size(); ++j) (arm_of[j] == 1 ? t : c).push_back(values[j]);
  return std::sqrt(sample_variance(c) / static_cast<double>(c.size()) +
                   sample_variance(t) / static_cast<double>(t.size()));
}

std::vector<int> actions_of(const EventLog& log) {
  std::vector<int> a(log.size());
  for (std::size_t j = 0; j < log.size(); ++j) a[j] = log.records[j].action;
  return a;
}

void finish_report(EstimateReport& r, double level) {
  r.level = level;
  std::tie(r.ci_low, r.ci_high) = confidence_interval(r, level);
}

// 2 sqrt(Var(Q) / (T N lambda_hat)); T N lambda_hat is the arrival count.
double q_standard_error(std::span<const double> values, const EventLog& log) {
  const double n = static_cast<double>(log.n_control + log.n_treatment);
  return 2.0 * std::sqrt(sample_variance(values) / n);
}

EstimateReport dq_report(std::string name, std::span<const double> values, const EventLog& log,
                         double lambda_hat, double level) {
  const ArmMeans m = arm_means(values, log);
  EstimateReport r;
  r.estimator = std::move(name);
  r.estimate = m.difference();
  r.std_error = q_standard_error(values, log);
  r.lambda_hat = lambda_hat;
  finish_report(r, level);
  return r;
}

void check_lambda(double lambda_hat) {
  if (!(lambda_hat > 0.0) || !std::isfinite(lambda_hat)) {
    throw EstimatorError(EstimatorErrc::ArmEmpty, "arrival-rate estimate is zero");
  }
}

EstimateReport cost_difference(std::string name, const CostSeries& costs, const EventLog& log, double level) {
  if (log.n_control < 2 || log.n_treatment < 2) {
    throw EstimatorError(EstimatorErrc::ArmEmpty, name + " needs at least two tasks per arm");
  }
  const ArmMeans m = arm_means(costs.cost_w, log);
  EstimateReport r;
  r.estimator = std::move(name);
  r.estimate = m.difference();
  r.std_error = two_sample_se(costs.cost_w, actions_of(log));
  r.lambda_hat = estimate_lambda(log);
  finish_report(r, level);
  return r;
}

}  // namespace

QSeries q_forward_sums(const CostSeries& costs, std::size_t truncation) {
  QSeries out;
  out.truncation = truncation;
  out.q = sliding_sums(costs.cost_q, truncation);
  out.w = sliding_sums(costs.cost_w, truncation);
  return out;
}

std::vector<double> naive_forward_sums(std::span<const double> costs, std::size_t truncation) {
  std::vector<double> out;
  if (truncation >= costs.size()) return out;
  out.resize(costs.size() - truncation);
  for (std::size_t j = 0; j < out.size(); ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k <= truncation; ++k) s += costs[j + k];
    out[j] = s;
  }
  return out;
}

std::size_t auto_truncation(int n_servers, double lambda) {
  // The small offset keeps e.g. 30 * 20 * 0.8 from flooring to 479.
  return static_cast<std::size_t>(std::floor(30.0 * n_servers * lambda + 1e-9));
}

std::size_t default_truncation(const EventLog& log) {
  return auto_truncation(log.n_servers(), estimate_lambda(log));
}

std::pair<double, double> confidence_interval(const EstimateReport& report, double level) {
  const double z = two_sided_z(level);
  return {report.estimate - z * report.std_error, report.estimate + z * report.std_error};
}

EstimateReport estimate_naive(const CostSeries& costs, const EventLog& log, double level) {
  return cost_difference("naive", costs, log, level);
}

EstimateReport estimate_wdq(const QSeries& qs, const EventLog& log, double lambda_hat, double level) {
  return dq_report("wdq", qs.w, log, lambda_hat, level);
}

EstimateReport estimate_qdq(const QSeries& qs, const EventLog& log, double lambda_hat, double level) {
  check_lambda(lambda_hat);
  std::vector<double> scaled(qs.q.size());
  for (std::size_t j = 0; j < scaled.size(); ++j) scaled[j] = qs.q[j] / lambda_hat;
  return dq_report("qdq", scaled, log, lambda_hat, level);
}

AlphaEstimate estimate_alpha(const QSeries& qs, double lambda_hat) {
  if (qs.size() < 2) throw EstimatorError(EstimatorErrc::InsufficientData, "alpha needs two eligible tasks");
  check_lambda(lambda_hat);
  const double var_q = sample_variance(qs.q);
  const double var_w = sample_variance(qs.w);
  const double cov = sample_covariance(qs.w, qs.q);
  const double num = var_q - lambda_hat * cov;
  const double den = lambda_hat * lambda_hat * var_w + var_q - 2.0 * lambda_hat * cov;
  if (!(std::abs(den) > 1e-12 * var_q) || !std::isfinite(num / den)) return AlphaEstimate{1.0, true};
  return AlphaEstimate{num / den, false};
}

std::vector<double> mixed_q(const QSeries& qs, double lambda_hat, double alpha) {
  std::vector<double> out(qs.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = alpha * qs.w[j] + (1.0 - alpha) * (qs.q[j] / lambda_hat);
  return out;
}

EstimateReport estimate_dq_mixed(const QSeries& qs, const EventLog& log, double lambda_hat,
                                 std::optional<double> forced_alpha, double level) {
  check_lambda(lambda_hat);
  AlphaEstimate a;
  if (forced_alpha) {
    a.alpha = *forced_alpha;
  } else {
    a = estimate_alpha(qs, lambda_hat);
  }
  const auto values = mixed_q(qs, lambda_hat, a.alpha);
  EstimateReport r = dq_report("mixdq", values, log, lambda_hat, level);
  r.alpha_hat = a.alpha;
  r.alpha_fallback = a.fallback;
  return r;
}

EstimateReport estimate_group(const CostSeries& costs, const EventLog& log, double level) {
  if (!is_group(log.config.design)) {
    throw EstimatorError(EstimatorErrc::WrongDesign, "group estimator needs a group-design log");
  }
  return cost_difference("group", costs, log, level);
}

EstimateReport estimate_switchback(const CostSeries& costs, const EventLog& log, double window, double level) {
  const auto* sw = std::get_if<Switchback>(&log.config.design);
  if (sw == nullptr || std::abs(sw->window - window) > 1e-12 * window) {
    throw EstimatorError(EstimatorErrc::WrongDesign, "switchback estimator needs a switchback log with window " +
                                                         std::to_string(window));
  }
  return cost_difference("switchback", costs, log, level);
}

const char* to_string(QTarget target) {
  switch (target) {
    case QTarget::Queue: return "q";
    case QTarget::Response: return "w";
    case QTarget::Mixed: return "mix";
  }
  return "?";
}

double RegressionFit::predict(const CostSeries& costs, std::size_t j) const {
  double y = intercept;
  for (std::size_t u = 0; u < kRegressionLags; ++u) y += coef[u] * costs.cost_q[j - u];
  return y;
}

RegressionFit fit_q_regression(const CostSeries& costs, std::span<const double> values, QTarget target) {
  constexpr std::size_t first = kRegressionLags - 1;
  if (values.size() < first + 6) {
    throw EstimatorError(EstimatorErrc::InsufficientData, "regression needs at least 6 tasks with index >= 4");
  }
  const std::size_t m = values.size() - first;

  // Center the lagged costs so the intercept is unpenalized and a constant
  // column drops out instead of making the system singular.
  Eigen::Matrix<double, 5, 1> xbar = Eigen::Matrix<double, 5, 1>::Zero();
  CompensatedSum ysum;
  for (std::size_t j = first; j < values.size(); ++j) {
    for (std::size_t u = 0; u < kRegressionLags; ++u) xbar(static_cast<Eigen::Index>(u)) += costs.cost_q[j - u];
    ysum.add(values[j]);
  }
  xbar /= static_cast<double>(m);
  const double ybar = ysum.value() / static_cast<double>(m);

  Eigen::Matrix<double, 5, 5> gram = Eigen::Matrix<double, 5, 5>::Zero();
  Eigen::Matrix<double, 5, 1> rhs = Eigen::Matrix<double, 5, 1>::Zero();
  Eigen::Matrix<double, 5, 1> x;
  for (std::size_t j = first; j < values.size(); ++j) {
    for (std::size_t u = 0; u < kRegressionLags; ++u) {
      x(static_cast<Eigen::Index>(u)) = costs.cost_q[j - u] - xbar(static_cast<Eigen::Index>(u));
    }
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
    rhs += x * (values[j] - ybar);
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += 1e-10;
  const Eigen::Matrix<double, 5, 1> beta = gram.ldlt().solve(rhs);

  RegressionFit fit;
  fit.target = target;
  fit.intercept = ybar;
  for (std::size_t u = 0; u < kRegressionLags; ++u) {
    fit.coef[u] = beta(static_cast<Eigen::Index>(u));
    fit.intercept -= fit.coef[u] * xbar(static_cast<Eigen::Index>(u));
  }
  return fit;
}

double regression_rss(const RegressionFit& fit, const CostSeries& costs, std::span<const double> values) {
  CompensatedSum rss;
  for (std::size_t j = kRegressionLags - 1; j < values.size(); ++j) {
    const double e = values[j] - fit.predict(costs, j);
    rss.add(e * e);
  }
  return rss.value();
}

std::vector<double> target_values(const QSeries& qs, QTarget target, double lambda_hat) {
  switch (target) {
    case QTarget::Queue: return qs.q;
    case QTarget::Response: return qs.w;
    case QTarget::Mixed: return mixed_q(qs, lambda_hat, estimate_alpha(qs, lambda_hat).alpha);
  }
  return {};
}

EstimateReport estimate_dq_doubly_robust(const QSeries& qs, const CostSeries& costs, const EventLog& log,
                                         QTarget target, double lambda_hat,
                                         const std::optional<RegressionFit>& fit_override, double level) {
  check_lambda(lambda_hat);
  constexpr std::size_t first = kRegressionLags - 1;
  const auto values = target_values(qs, target, lambda_hat);
  if (values.size() < first + 6) {
    throw EstimatorError(EstimatorErrc::InsufficientData, "doubly robust estimator needs 6 tasks with index >= 4");
  }
  const RegressionFit fit = fit_override ? *fit_override : fit_q_regression(costs, values, target);

  // Propensities are the empirical arm shares over the summation range.
  std::size_t n_t = 0;
  for (std::size_t j = first; j < values.size(); ++j) n_t += log.records[j].action == 1;
  const std::size_t m = values.size() - first;
  if (n_t == 0 || n_t == m) throw EstimatorError(EstimatorErrc::ArmEmpty, "an arm has no eligible tasks");
  const double p1 = static_cast<double>(n_t) / static_cast<double>(m);
  const double p0 = static_cast<double>(m - n_t) / static_cast<double>(m);

  CompensatedSum total;
  std::vector<double> residual(m);
  for (std::size_t j = first; j < values.size(); ++j) {
    const double reg = fit.predict(costs, j);
    const double r = values[j] - reg;
    residual[j - first] = r;
    const int a = log.records[j].action;
    const double dr1 = reg + (a == 1 ? r / p1 : 0.0);
    const double dr0 = reg + (a == 0 ? r / p0 : 0.0);
    total.add(dr1 - dr0);
  }
  const double scale = target == QTarget::Queue ? 1.0 / lambda_hat : 1.0;

  EstimateReport out;
  out.estimator = target == QTarget::Queue ? "qdq_dr" : target == QTarget::Response ? "wdq_dr" : "mixdq_dr";
  out.estimate = scale * total.value() / static_cast<double>(m);
  out.std_error = scale * q_standard_error(residual, log);
  out.lambda_hat = lambda_hat;
  if (target == QTarget::Mixed) out.alpha_hat = estimate_alpha(qs, lambda_hat).alpha;
  finish_report(out, level);
  return out;
}

}  // namespace dqsim
