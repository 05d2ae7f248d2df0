#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "ltvdw/commands.hpp"
#include "ltvdw/io.hpp"

using namespace ltvdw;
namespace fs = std::filesystem;

namespace {

// Fast variant of the shipped car config for test turnaround.
std::string test_config(const std::string& out_dir, const std::string& extra = "") {
  return "[scenario]\n"
         "dt = 0.05\n"
         "duration = 12.0\n"
         "v_mean = 10.0\n"
         "v_amp = 5.0\n"
         "v_period = 25.0\n"
         "heading_amp = 0.35\n"
         "heading_period = 12.5\n"
         "[noise]\n"
         "sigma_e = [0.5, 0.5]\n"
         "[detector]\n"
         "window = 21\n"
         "target_rate_per_s = 0.02\n"
         "[attack]\n"
         "type = none\n"
         "start = 6.0\n"
         "[run]\n"
         "seed = 11\n"
         "runs = 30\n"
         "out = " + out_dir + "\n" + extra;
}

std::string fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("ltvdw_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

ScenarioConfig config_from_text(const std::string& text, const std::string& dir) {
  const std::string path = dir + "/config.cfg";
  atomic_write_file(path, text);
  return cli::resolve_config(path, {});
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth -> calibrate -> detect pipeline produces detection artifacts") {
  const std::string dir = fresh_dir("pipeline");
  ScenarioConfig cfg = config_from_text(test_config(dir), dir);

  CHECK(cli::cmd_synth(cfg) == cli::kExitOk);
  CHECK(file_exists(dir + "/synth/A.csv"));
  CHECK(file_exists(dir + "/synth/assumptions.txt"));

  CHECK(cli::cmd_calibrate(cfg) == cli::kExitOk);
  CHECK(file_exists(dir + "/calib/V.csv"));
  const auto threshold_kv = kv_from_text(read_file(dir + "/calib/threshold.txt"));
  CHECK(threshold_kv.count("threshold") == 1);

  cfg.attack_kind = AttackKind::Replay;
  cfg.runs = 20;
  CHECK(cli::cmd_detect(cfg) == cli::kExitOk);
  const auto summary = kv_from_text(read_file(dir + "/detect/summary.txt"));
  CHECK(summary.at("attack") == "replay");
  CHECK(std::stoi(summary.at("detected_runs")) >= 19);
  CHECK(summary.count("median_delay_s") == 1);

  CHECK(cli::cmd_compare(cfg) == cli::kExitOk);
  const auto stats = kv_from_text(read_file(dir + "/compare/stats.txt"));
  CHECK(std::stod(stats.at("cov_ltv")) < std::stod(stats.at("cov_lti")));
  // one row per simulated step plus the header
  const std::string compare_csv = read_file(dir + "/compare/compare.csv");
  const long rows = std::count(compare_csv.begin(), compare_csv.end(), '\n');
  CHECK(rows == 240 + 1);  // 12 s at dt = 0.05
}

TEST_CASE("detect refuses to run without matching calibration artifacts") {
  const std::string dir = fresh_dir("nocalib");
  ScenarioConfig cfg = config_from_text(test_config(dir), dir);
  CHECK_THROWS_AS(cli::cmd_detect(cfg), ConfigError);

  CHECK(cli::cmd_synth(cfg) == cli::kExitOk);
  CHECK(cli::cmd_calibrate(cfg) == cli::kExitOk);

  // change the plant: stored hash no longer matches
  cfg.scenario.traj.v_mean = 12.0;
  CHECK_THROWS_WITH_AS(cli::cmd_detect(cfg), doctest::Contains("hash"), ConfigError);
}

TEST_CASE("calibrate requires synth artifacts first") {
  const std::string dir = fresh_dir("nosynth");
  ScenarioConfig cfg = config_from_text(test_config(dir), dir);
  CHECK_THROWS_WITH_AS(cli::cmd_calibrate(cfg), doctest::Contains("synth"), ConfigError);
}

TEST_CASE("ensemble calibration rejects run counts below the residual rank") {
  const std::string dir = fresh_dir("ensemblerank");
  ScenarioConfig cfg = config_from_text(
      test_config(dir, "[detector]\nnormalization = ensemble\n"), dir);
  CHECK(cli::cmd_synth(cfg) == cli::kExitOk);
  cfg.runs = 1;  // r = 5 residuals cannot be identified from one trace
  CHECK_THROWS_WITH_AS(cli::cmd_calibrate(cfg), doctest::Contains("runs"), ConfigError);
}

TEST_CASE("attack start beyond the horizon runs clean") {
  const std::string dir = fresh_dir("lateattack");
  ScenarioConfig cfg = config_from_text(test_config(dir), dir);
  CHECK(cli::cmd_synth(cfg) == cli::kExitOk);
  CHECK(cli::cmd_calibrate(cfg) == cli::kExitOk);
  cfg.attack_kind = AttackKind::Replay;
  cfg.attack_start_s = 1000.0;  // beyond the 12 s horizon
  cfg.runs = 5;
  CHECK(cli::cmd_detect(cfg) == cli::kExitOk);
  const auto summary = kv_from_text(read_file(dir + "/detect/summary.txt"));
  CHECK(std::stoi(summary.at("detected_runs")) == 0);
}

TEST_CASE("identical config and seed give byte-identical artifacts") {
  const std::string dir_a = fresh_dir("repro_a");
  const std::string dir_b = fresh_dir("repro_b");
  ScenarioConfig a = config_from_text(test_config(dir_a), dir_a);
  ScenarioConfig b = config_from_text(test_config(dir_b), dir_b);
  a.runs = b.runs = 10;

  for (ScenarioConfig* cfg : {&a, &b}) {
    CHECK(cli::cmd_synth(*cfg) == cli::kExitOk);
    CHECK(cli::cmd_calibrate(*cfg) == cli::kExitOk);
    cfg->attack_kind = AttackKind::Replay;
    CHECK(cli::cmd_detect(*cfg) == cli::kExitOk);
  }
  for (const char* rel :
       {"/synth/A.csv", "/synth/K.csv", "/calib/V.csv", "/calib/metrics_noattack.csv",
        "/detect/trace.csv", "/detect/metrics.csv"}) {
    CHECK(read_file(dir_a + rel) == read_file(dir_b + rel));
  }
}

TEST_CASE("validate writes its reports and passes on the default scalar checks") {
  const std::string dir = fresh_dir("validate");
  ScenarioConfig cfg = config_from_text(test_config(dir), dir);
  CHECK(cli::cmd_validate(cfg) == cli::kExitOk);
  const auto summary = kv_from_text(read_file(dir + "/validate/summary.txt"));
  CHECK(summary.at("pass") == "true");
  CHECK(summary.at("c1_noattack") == "converging");
  CHECK(summary.at("replay_rejected") == "true");
  CHECK(file_exists(dir + "/validate/alpha_sweep.txt"));
  CHECK(file_exists(dir + "/validate/wishart_window.txt"));
}

TEST_CASE("matrix schedule CSV round trips") {
  const std::string dir = fresh_dir("matcsv");
  std::vector<Eigen::MatrixXd> seq;
  Rng rng(2);
  for (int n = 0; n < 7; ++n) {
    Eigen::MatrixXd m(2, 3);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = rng.normal();
    seq.push_back(m);
  }
  const std::string csv = matrix_schedule_to_csv("V", seq);
  std::string name;
  const auto parsed = matrix_schedule_from_csv(csv, &name);
  CHECK(name == "V");
  REQUIRE(parsed.size() == seq.size());
  for (size_t n = 0; n < seq.size(); ++n) {
    CHECK((parsed[n] - seq[n]).cwiseAbs().maxCoeff() == 0.0);  // %.17g round trip
  }
}

TEST_CASE("the installed binary wires subcommands, flags and exit codes") {
  const std::string dir = fresh_dir("binary");
  const std::string config_path = dir + "/config.cfg";
  atomic_write_file(config_path, test_config(dir));

  const std::string base = std::string(LTVDW_CLI_PATH);
  auto run = [&](const std::string& args) {
    const std::string cmd = base + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };

  CHECK(run("synth --config " + config_path) == 0);
  CHECK(run("calibrate --config " + config_path) == 0);
  CHECK(run("detect --config " + config_path + " --attack replay --runs 5") == 0);
  CHECK(run("detect --config " + config_path + " --attack bogus") == cli::kExitConfigError);
  CHECK(run("synth --config " + dir + "/does_not_exist.cfg") == cli::kExitConfigError);
}

}  // TEST_SUITE
