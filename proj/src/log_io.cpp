#include "dqsim/log_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dqsim/config_file.hpp"
#include "dqsim/errors.hpp"
#include "dqsim/format.hpp"

namespace dqsim {

namespace {

constexpr std::string_view kHeader =
    "index,arrival_time,action,observed,assigned_server,service_duration,response_time,dispatcher_delay,"
    "dispatcher_backlog";

std::string join_servers(const std::vector<std::uint32_t>& servers) {
  std::string out;
  for (std::size_t i = 0; i < servers.size(); ++i) {
    if (i) out += '|';
    out += std::to_string(servers[i] + 1);
  }
  return out;
}

std::vector<std::uint32_t> split_servers(std::string_view text) {
  std::vector<std::uint32_t> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto bar = text.find('|', start);
    const auto v = parse_uint(text.substr(start, bar == std::string_view::npos ? bar : bar - start));
    if (v < 1) throw std::invalid_argument("server numbers start at 1");
    out.push_back(static_cast<std::uint32_t>(v - 1));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return out;
}

// The CSV does not carry the dispatcher's belief about the assigned queue,
// so it is recovered from the policy: the JIQ idle branch records one
// observation but assigns an idle server.
bool idle_branch(const SimConfig& config, const TaskRecord& r) {
  const auto* jiq = std::get_if<Jiq>(&policy_for_arm(config, r.action));
  if (jiq == nullptr || r.observed_count != 1) return false;
  if (jiq->d >= 2) return true;
  // With d = 1 both branches observe one server. An idle-branch job starts
  // service on release, so its wait is zero up to print precision.
  const double wait = r.response_time - r.dispatcher_delay - r.service_duration;
  return wait <= 1e-7 * std::max(1.0, r.response_time);
}

}  // namespace

std::filesystem::path meta_path(const std::filesystem::path& log_path) {
  std::filesystem::path p = log_path;
  p += ".meta";
  return p;
}

void write_log_csv(std::ostream& out, const EventLog& log) {
  out << kHeader << '\n';
  std::string row;
  char num[64];
  auto put_g = [&](double v) {
    const int n = std::snprintf(num, sizeof num, "%.9g", v);
    row.append(num, static_cast<std::size_t>(n));
  };
  for (const TaskRecord& r : log.records) {
    row.clear();
    row += std::to_string(r.index);
    row += ',';
    put_g(r.arrival_time);
    row += ',';
    row += r.action ? '1' : '0';
    row += ',';
    const auto obs = log.observed(r);
    for (std::size_t k = 0; k < obs.size(); ++k) {
      if (k) row += '|';
      row += std::to_string(obs[k]);
    }
    row += ',';
    row += std::to_string(r.assigned_server + 1);
    row += ',';
    put_g(r.service_duration);
    row += ',';
    put_g(r.response_time);
    row += ',';
    put_g(r.dispatcher_delay);
    row += ',';
    row += std::to_string(r.dispatcher_backlog);
    row += '\n';
    out << row;
  }
}

std::string format_log_meta(const EventLog& log) {
  std::ostringstream out;
  out << format_sim_config(log.config);
  out << "records = " << log.records.size() << '\n';
  out << "n_control = " << log.n_control << '\n';
  out << "n_treatment = " << log.n_treatment << '\n';
  if (log.emptied_at) out << "emptied_at = " << format_exact(*log.emptied_at) << '\n';
  if (log.group_partition) {
    out << "group_control = " << join_servers((*log.group_partition)[0]) << '\n';
    out << "group_treatment = " << join_servers((*log.group_partition)[1]) << '\n';
  }
  return out.str();
}

void write_log(const EventLog& log, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_log_csv(out, log);
    if (!out) throw Error("write failed for " + path.string());
  }
  std::ofstream meta(meta_path(path), std::ios::binary);
  if (!meta) throw Error("cannot write " + meta_path(path).string());
  meta << format_log_meta(log);
}

EventLog parse_log(std::string_view csv, std::string_view meta) {
  EventLog log;
  std::string config_text;
  std::optional<std::size_t> n_records;
  std::optional<std::size_t> n_control, n_treatment;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < meta.size()) {
    auto end = meta.find('\n', start);
    if (end == std::string_view::npos) end = meta.size();
    const std::string_view raw = meta.substr(start, end - start);
    start = end + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') {
      config_text += '\n';
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value' in log metadata");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      if (key == "records") {
        n_records = parse_uint(value);
      } else if (key == "n_control") {
        n_control = parse_uint(value);
      } else if (key == "n_treatment") {
        n_treatment = parse_uint(value);
      } else if (key == "emptied_at") {
        log.emptied_at = parse_double(value);
      } else if (key == "group_control" || key == "group_treatment") {
        if (!log.group_partition) log.group_partition.emplace();
        (*log.group_partition)[key == "group_treatment"] = split_servers(value);
      } else {
        config_text.append(raw);
        config_text += '\n';
        continue;
      }
    } catch (const std::invalid_argument&) {
      throw ParseError(line_no, "bad value for '" + std::string(key) + "'");
    }
    config_text += '\n';
  }
  // Line numbers of config errors stay aligned with the metadata file.
  log.config = parse_config(config_text).sim;
  log.horizon = log.config.horizon;
  const int n = log.config.n_servers;

  line_no = 0;
  start = 0;
  bool header_seen = false;
  while (start < csv.size()) {
    auto end = csv.find('\n', start);
    if (end == std::string_view::npos) end = csv.size();
    std::string_view line = csv.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line != kHeader) throw ParseError(line_no, "unexpected log header");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    std::string_view f[9];
    std::size_t pos = 0;
    for (int k = 0; k < 9; ++k) {
      const auto comma = line.find(',', pos);
      if ((k < 8) == (comma == std::string_view::npos)) throw ParseError(line_no, "expected 9 fields");
      f[k] = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      pos = comma + 1;
    }
    TaskRecord r;
    try {
      r.index = parse_uint(f[0]);
      r.arrival_time = parse_double(f[1]);
      const auto action = parse_uint(f[2]);
      if (action > 1) throw std::invalid_argument("action");
      r.action = static_cast<int>(action);
      r.observed_offset = log.observed_values.size();
      if (!f[3].empty()) {
        std::size_t s = 0;
        for (;;) {
          const auto bar = f[3].find('|', s);
          const auto v = parse_uint(f[3].substr(s, bar == std::string_view::npos ? bar : bar - s));
          if (v > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("observed");
          log.observed_values.push_back(static_cast<std::uint32_t>(v));
          if (bar == std::string_view::npos) break;
          s = bar + 1;
        }
      }
      r.observed_count = static_cast<std::uint32_t>(log.observed_values.size() - r.observed_offset);
      const auto server = parse_uint(f[4]);
      if (server < 1 || server > static_cast<unsigned long long>(n)) throw std::invalid_argument("server");
      r.assigned_server = static_cast<std::uint32_t>(server - 1);
      r.service_duration = parse_double(f[5]);
      r.response_time = parse_double(f[6]);
      r.dispatcher_delay = parse_double(f[7]);
      r.dispatcher_backlog = parse_uint(f[8]);
    } catch (const std::invalid_argument&) {
      throw ParseError(line_no, "malformed log row");
    }
    if (r.index != log.records.size()) throw ParseError(line_no, "task indices must run 0, 1, 2, ...");
    if (idle_branch(log.config, r)) {
      r.assigned_queue = 0;
    } else if (r.observed_count > 0) {
      const auto obs = log.observed(r);
      r.assigned_queue = *std::min_element(obs.begin(), obs.end());
    }
    (r.action ? log.n_treatment : log.n_control)++;
    log.records.push_back(r);
  }
  if (!header_seen) throw ParseError(1, "empty log file");
  if (n_records && *n_records != log.records.size())
    throw ParseError(line_no, "log has " + std::to_string(log.records.size()) + " rows, metadata says " +
                                  std::to_string(*n_records));
  if ((n_control && *n_control != log.n_control) || (n_treatment && *n_treatment != log.n_treatment))
    throw ParseError(line_no, "arm counts disagree with metadata");
  return log;
}

EventLog read_log(const std::filesystem::path& path) {
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const std::string csv = slurp(path);
  const std::string meta = slurp(meta_path(path));
  return parse_log(csv, meta);
}

}  // namespace dqsim
