// cohesive-phase: desk-scale experiment driver for the cohesive phase-field
// library. One subcommand per experiment family; parameters come from an
// optional flat key=value config file plus --key value overrides.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "cohesive/jobs.hpp"

namespace {

void usage() {
  std::printf("usage: cohesive-phase <subcommand> [--config FILE] [--out results.csv] "
              "[--seed N] [--key value ...]\n\nsubcommands:\n");
  for (const std::string& s : cohesive::known_subcommands())
    std::printf("  %s\n", s.c_str());
  std::printf("\nAny --key value pair overrides the config file entry of the same name.\n"
              "Thread count for sweeps: COHESIVE_THREADS.\n");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cohesive;
  if (argc < 2) {
    usage();
    return kExitUsage;
  }
  const std::string sub = argv[1];
  if (sub == "-h" || sub == "--help" || sub == "help") {
    usage();
    return kExitPass;
  }
  const auto& cmds = known_subcommands();
  if (std::find(cmds.begin(), cmds.end(), sub) == cmds.end()) {
    std::fprintf(stderr, "cohesive-phase: unknown subcommand '%s'\n", sub.c_str());
    usage();
    return kExitUsage;
  }

  JobConfig config;
  config.subcommand = sub;
  config.out_csv = "results.csv";
  try {
    // First pass: locate --config so file values load before overrides.
    for (int i = 2; i + 1 < argc; i += 2) {
      if (std::string(argv[i]) == "--config")
        config.params = KeyValueConfig::from_file(argv[i + 1]);
    }
    for (int i = 2; i < argc; i += 2) {
      std::string key = argv[i];
      if (key.rfind("--", 0) != 0) {
        std::fprintf(stderr, "cohesive-phase: expected --key, got '%s'\n", key.c_str());
        return kExitUsage;
      }
      key = key.substr(2);
      if (i + 1 >= argc) {
        std::fprintf(stderr, "cohesive-phase: missing value for --%s\n", key.c_str());
        return kExitUsage;
      }
      const std::string value = argv[i + 1];
      if (key == "config") continue;
      if (key == "out") config.out_csv = value;
      else if (key == "seed") config.seed = std::stoull(value);
      else config.params.set(key, value);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cohesive-phase: %s\n", e.what());
    return kExitUsage;
  }

  JobOutcome outcome = run(config);
  for (const ResultRow& row : outcome.rows) {
    const bool show_flag = !row.pass || !std::isnan(row.tolerance);
    std::printf("%-16s %-40s %.10g%s\n", row.subcommand.c_str(), row.metric.c_str(), row.value,
                show_flag ? (row.pass ? "  [ok]" : "  [FAIL]") : "");
  }
  if (!config.out_csv.empty())
    std::printf("results written to %s\n", config.out_csv.c_str());
  return outcome.exit_code;
}
