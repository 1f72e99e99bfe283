#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cohesive/io.hpp"

namespace cohesive {

// Exit codes shared by run()/sweep() and the CLI.
inline constexpr int kExitPass = 0;
inline constexpr int kExitMetricFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitSolver = 3;

struct JobConfig {
  std::string subcommand;
  KeyValueConfig params;
  std::uint64_t seed = 1;
  std::string out_csv;  // results file; empty writes nothing
};

struct JobOutcome {
  int exit_code = kExitPass;
  std::vector<ResultRow> rows;
};

// Dispatches one job to its owning module. Deterministic given the seed.
JobOutcome run(const JobConfig& config);

// Fans independent jobs out over a bounded thread pool and merges rows in
// config order. Exit code is the worst of the per-job codes.
JobOutcome sweep(const std::vector<JobConfig>& configs, const std::string& out_csv = "");

// COHESIVE_THREADS when set, hardware concurrency otherwise.
int thread_count();

const std::vector<std::string>& known_subcommands();

}  // namespace cohesive
