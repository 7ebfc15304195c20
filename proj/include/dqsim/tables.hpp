#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dqsim/harness.hpp"

namespace dqsim {

inline constexpr int kTableCount = 13;

struct TableRow {
  std::string label;
  ExperimentPlan plan;
};

// Plans for the rows of table `id` (1..13) at the given scale: horizon
// 1e6 * scale, ceil(100 * scale) replications with a floor of 10, N = 20,
// p = 0.5, L = floor(30 N lambda) unless the table varies it.
// Throws UnknownTable for ids outside 1..13 and ConfigInvalid for a scale
// outside (0, 1].
std::vector<TableRow> table_plans(int id, double scale, std::uint64_t seed = 1);

struct TableResult {
  int id = 0;
  std::vector<std::string> labels;
  std::vector<ReplicationSummary> rows;
};

TableResult reproduce_table(int id, double scale, std::uint64_t seed = 1, std::size_t jobs = 0);

// Summary CSV with header, one block per row.
void write_table(std::ostream& out, const TableResult& result);

}  // namespace dqsim
