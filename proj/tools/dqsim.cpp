// Command-line front end: simulate, estimate, ground-truth, experiment, table.
#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "dqsim/config_file.hpp"
#include "dqsim/errors.hpp"
#include "dqsim/estimators.hpp"
#include "dqsim/format.hpp"
#include "dqsim/harness.hpp"
#include "dqsim/log_io.hpp"
#include "dqsim/simulator.hpp"
#include "dqsim/tables.hpp"

using namespace dqsim;

namespace {

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2 };

struct Options {
  std::string config;
  std::string out;
  std::string in;
  std::optional<std::uint64_t> seed;
  double scale = 1.0;
  std::size_t jobs = 0;
  std::optional<int> table;
};

// Destination stream: the --out file, or stdout when none was given.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw Error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

ParsedConfig require_config(const Options& o) {
  if (o.config.empty()) throw ConfigInvalid("--config is required");
  ParsedConfig pc = load_config(o.config);
  if (o.seed) {
    pc.sim.seed = *o.seed;
    pc.plan.base.seed = *o.seed;
  }
  return pc;
}

void run_simulate(const Options& o) {
  const ParsedConfig pc = require_config(o);
  if (pc.table) throw ConfigInvalid("simulate needs a system config, not a table file");
  const EventLog log = simulate(pc.sim);
  if (o.out.empty()) {
    write_log_csv(std::cout, log);
  } else {
    write_log(log, o.out);
  }
}

void run_estimate(const Options& o) {
  if (o.in.empty()) throw ConfigInvalid("--in is required");
  const EventLog log = read_log(o.in);
  EstimationContext ctx{default_truncation(log), MuMode::Known, 0.95};
  std::vector<EstimatorSpec> specs = parse_estimator_list("naive,qdq,wdq,mixdq");
  if (!o.config.empty()) {
    const ParsedConfig pc = load_config(o.config);
    specs = pc.plan.estimators;
    ctx = {plan_truncation(pc.plan), pc.plan.mu, pc.plan.ci_level};
  }
  const auto reports = estimate_log(log, specs, ctx);
  Output out(o.out);
  write_report_header(out.stream());
  for (const auto& r : reports) write_report_row(out.stream(), r);
}

void run_ground_truth(const Options& o) {
  const ParsedConfig pc = require_config(o);
  if (pc.table) throw ConfigInvalid("ground-truth needs a system config, not a table file");
  ComputedTruth spec{pc.sim.horizon, 10};
  if (const auto* c = std::get_if<ComputedTruth>(&pc.plan.ground_truth)) spec = *c;
  const GroundTruth gt = ground_truth_gte(pc.sim, spec.horizon, spec.replications, o.jobs);
  Output out(o.out);
  out.stream() << "value,se,control_mean,treatment_mean,replications\n"
               << format_9g(gt.value) << ',' << format_9g(gt.se) << ',' << format_9g(gt.control_mean) << ','
               << format_9g(gt.treatment_mean) << ',' << gt.replications << '\n';
}

void write_run_meta(const std::string& out_path, const std::string& plan_text, double seconds) {
  if (out_path.empty()) return;
  std::ofstream meta(out_path + ".meta", std::ios::binary);
  meta << plan_text << "wall_seconds = " << format_9g(seconds) << '\n';
}

std::string describe_plan(const ExperimentPlan& plan) {
  std::string text = format_sim_config(plan.base);
  text += "replications = " + std::to_string(plan.replications) + "\n";
  text += "truncation = " + std::to_string(plan_truncation(plan)) + "\n";
  std::string names;
  for (const auto& e : plan.estimators) names += (names.empty() ? "" : ",") + e.label;
  text += "estimators = " + names + "\n";
  if (const auto* s = std::get_if<SuppliedTruth>(&plan.ground_truth)) {
    text += "ground_truth = " + format_exact(s->value) + "\n";
  } else {
    const auto& c = std::get<ComputedTruth>(plan.ground_truth);
    text += "ground_truth = compute\nground_truth_horizon = " + format_exact(c.horizon) +
            "\nground_truth_replications = " + std::to_string(c.replications) + "\n";
  }
  for (std::size_t i = 0; i < plan.replications; ++i)
    text += "# replication " + std::to_string(i) + " seed " + std::to_string(replication_seed(plan.base.seed, i)) + "\n";
  return text;
}

void run_experiment_cmd(const Options& o) {
  const ParsedConfig pc = require_config(o);
  if (pc.table) throw ConfigInvalid("experiment needs a system config; use the table subcommand for table files");
  const auto start = std::chrono::steady_clock::now();
  const ReplicationSummary summary = run_experiment(pc.plan, o.jobs);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  {
    Output out(o.out);
    write_summary_header(out.stream());
    write_summary_rows(out.stream(), "experiment", "1", summary);
  }
  for (const auto& run : summary.runs)
    for (const auto& err : run.errors) std::cerr << "replication seed " << run.seed << ": " << err << '\n';
  if (summary.invalid) std::cerr << "warning: more than 10% of replications failed; summary is invalid\n";
  write_run_meta(o.out, describe_plan(pc.plan), seconds);
}

void run_table(const Options& o) {
  std::optional<int> id = o.table;
  double scale = o.scale;
  std::uint64_t seed = 1;
  if (!o.config.empty()) {
    const ParsedConfig pc = load_config(o.config);
    if (!pc.table) throw ConfigInvalid("config file has no 'table' key");
    if (!id) id = pc.table;
    if (pc.scale && scale == 1.0) scale = *pc.scale;
    seed = pc.sim.seed;
  }
  if (o.seed) seed = *o.seed;
  if (!id) throw ConfigInvalid("table needs --table ID or a config with a 'table' key");
  const auto start = std::chrono::steady_clock::now();
  const TableResult result = reproduce_table(*id, scale, seed, o.jobs);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  {
    Output out(o.out);
    write_table(out.stream(), result);
  }
  std::string meta = "table = " + std::to_string(*id) + "\nscale = " + format_exact(scale) +
                     "\nseed = " + std::to_string(seed) + "\n";
  write_run_meta(o.out, meta, seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel-server A/B experiment simulator and treatment-effect estimators"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Config file (key = value lines)");
    sub->add_option("--out", o.out, "Output file (stdout when omitted)");
  };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Override the root seed"); };
  auto add_jobs = [&](CLI::App* sub) {
    sub->add_option("--jobs", o.jobs, "Worker threads; 0 uses all cores")->check(CLI::NonNegativeNumber);
  };

  auto* sim = app.add_subcommand("simulate", "Run one simulation and write its event log");
  add_common(sim);
  add_seed(sim);

  auto* est = app.add_subcommand("estimate", "Estimate the treatment effect from a log file");
  add_common(est);
  est->add_option("--in", o.in, "Event log written by simulate")->required();

  auto* gt = app.add_subcommand("ground-truth", "Compute the global treatment effect by simulation");
  add_common(gt);
  add_seed(gt);
  add_jobs(gt);

  auto* exp = app.add_subcommand("experiment", "Run replicated experiments and summarize estimators");
  add_common(exp);
  add_seed(exp);
  add_jobs(exp);

  auto* tab = app.add_subcommand("table", "Reproduce one of the built-in experiment tables");
  add_common(tab);
  add_seed(tab);
  add_jobs(tab);
  tab->add_option("--scale", o.scale, "Horizon and replication scale in (0, 1]");
  tab->add_option("--table", o.table, "Table id (1-13)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  try {
    if (*sim) run_simulate(o);
    if (*est) run_estimate(o);
    if (*gt) run_ground_truth(o);
    if (*exp) run_experiment_cmd(o);
    if (*tab) run_table(o);
  } catch (const ConfigInvalid& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kUsage;
  } catch (const UnknownTable& e) {
    std::cerr << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
