#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cohesive/jobs.hpp"

using namespace cohesive;

TEST_CASE("key value config parsing") {
  KeyValueConfig cfg = KeyValueConfig::from_string(
      "# comment line\n"
      "p = 2.5\n"
      "z = 0.1, 1, 10\n"
      "mode=subadd\n"
      "M = inf\n"
      "flag = true\n");
  CHECK(cfg.get_double("p", 0.0) == 2.5);
  CHECK(cfg.get_list("z", {}).size() == 3);
  CHECK(cfg.get_list("z", {})[2] == 10.0);
  CHECK(std::isinf(cfg.get_double("M", 0.0)));
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_int("missing", 7) == 7);
  CHECK_THROWS_AS(KeyValueConfig::from_string("novalue\n"), InputError);
  CHECK_THROWS_AS(cfg.get_double("flag", 0.0), InputError);
}

TEST_CASE("run dispatch and exit codes") {
  JobConfig job;
  job.subcommand = "does-not-exist";
  CHECK(run(job).exit_code == kExitUsage);

  job.subcommand = "quantize-check";
  job.seed = 7;
  job.params.set("fields", "60");
  JobOutcome ok = run(job);
  CHECK(ok.exit_code == kExitPass);
  CHECK(!ok.rows.empty());

  JobConfig hat;
  hat.subcommand = "projection-check";
  hat.params.set("density", "compressible_hat");
  hat.params.set("alpha", "1");
  hat.params.set("samples", "500");
  JobOutcome fail = run(hat);
  CHECK(fail.exit_code == kExitMetricFailure);
  bool has_witness = false;
  for (const ResultRow& r : fail.rows)
    if (r.metric.rfind("witness", 0) == 0) has_witness = true;
  CHECK(has_witness);

  JobConfig square;
  square.subcommand = "bv-test";
  square.params.set("g", "square");
  square.params.set("z", "2");
  square.params.set("splits", "1");
  CHECK(run(square).exit_code == kExitMetricFailure);

  JobConfig env;
  env.subcommand = "envelope-check";
  env.params.set("points", "801");
  CHECK(run(env).exit_code == kExitPass);
}

TEST_CASE("metric values reproduce bitwise for a fixed seed") {
  JobConfig job;
  job.subcommand = "quantize-check";
  job.seed = 1234;
  job.params.set("fields", "40");
  JobOutcome a = run(job);
  JobOutcome b = run(job);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].metric == b.rows[i].metric);
    CHECK(a.rows[i].value == b.rows[i].value);  // bitwise
  }
}

TEST_CASE("sweep merges rows in config order") {
  CHECK(sweep({}).exit_code == kExitPass);
  CHECK(sweep({}).rows.empty());

  std::vector<JobConfig> jobs(2);
  jobs[0].subcommand = "envelope-check";
  jobs[0].params.set("points", "401");
  jobs[1].subcommand = "projection-check";
  jobs[1].params.set("density", "compressible_plus");
  jobs[1].params.set("samples", "200");
  JobOutcome merged = sweep(jobs);
  CHECK(merged.exit_code == kExitPass);
  REQUIRE(merged.rows.size() >= 2);
  CHECK(merged.rows.front().subcommand == "envelope-check");
  CHECK(merged.rows.back().subcommand == "projection-check");
}

TEST_CASE("results csv is written with the schema header") {
  JobConfig job;
  job.subcommand = "envelope-check";
  job.params.set("points", "401");
  job.out_csv = "/tmp/cohesive_cli_test.csv";
  run(job);
  std::ifstream in(job.out_csv);
  REQUIRE(in.good());
  std::string line1, line2;
  std::getline(in, line1);
  std::getline(in, line2);
  CHECK(line1 == "# cohesive-phase results schema v1");
  CHECK(line2 == "subcommand,params,metric,value,tolerance,pass,wall_ms");
  std::remove(job.out_csv.c_str());
}

TEST_CASE("installed binary smoke test") {
  const std::string bin = COHESIVE_PHASE_BIN;
  CHECK(std::system((bin + " --help > /dev/null").c_str()) == 0);
  const int unknown = std::system((bin + " frobnicate > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(unknown) == kExitUsage);
  const int ok = std::system(
      (bin + " envelope-check --points 401 --out /tmp/cohesive_cli_bin.csv > /dev/null").c_str());
  CHECK(WEXITSTATUS(ok) == kExitPass);
  std::remove("/tmp/cohesive_cli_bin.csv");
}
