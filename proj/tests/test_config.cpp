#include <doctest.h>

#include <string>

#include "ltvdw/config.hpp"

using namespace ltvdw;

namespace {
const char* kMinimalConfig = R"(
[scenario]
dt = 0.05
duration = 10.0

[noise]
sigma_e = [0.5, 0.5]

[detector]
window = 21

[run]
seed = 7
runs = 10
out = out
)";
}

TEST_SUITE("config") {

TEST_CASE("minimal config parses with defaults filled in") {
  const ScenarioConfig cfg = parse_config_text(kMinimalConfig);
  CHECK(cfg.scenario.traj.dt == 0.05);
  CHECK(cfg.scenario.traj.duration_s == 10.0);
  CHECK(cfg.scenario.window == 21);
  CHECK(cfg.seed == 7);
  CHECK(cfg.runs == 10);
  CHECK(cfg.attack_kind == AttackKind::None);
  CHECK(cfg.normalization == NormalizationMode::Analytic);
}

TEST_CASE("serialize -> parse round trip is the identity") {
  ScenarioConfig cfg = parse_config_text(kMinimalConfig);
  cfg.attack_kind = AttackKind::Replay;
  cfg.attack_start_s = 12.5;
  const std::string text = serialize_config(cfg);
  const ScenarioConfig again = parse_config_text(text);
  CHECK(serialize_config(again) == text);
}

TEST_CASE("dt = 0 is rejected at parse time") {
  const std::string bad = std::string(kMinimalConfig).replace(
      std::string(kMinimalConfig).find("dt = 0.05"), 9, "dt = 0.00");
  CHECK_THROWS_WITH_AS(parse_config_text(bad), doctest::Contains("dt"), ConfigError);
}

TEST_CASE("a missing section is reported by name") {
  const char* text = "[scenario]\ndt = 0.05\n[detector]\nwindow = 21\n[run]\nseed = 1\n";
  CHECK_THROWS_WITH_AS(parse_config_text(text), doctest::Contains("[noise]"), ConfigError);
}

TEST_CASE("parse errors carry line numbers") {
  const char* text = "[scenario]\ndt = 0.05\nduration == 10\n";
  CHECK_THROWS_WITH_AS(parse_config_text(text), doctest::Contains("line 3"), ConfigError);

  const char* badnum = "[scenario]\ndt = fast\n";
  CHECK_THROWS_WITH_AS(parse_config_text(badnum), doctest::Contains("line 2"), ConfigError);
}

TEST_CASE("unknown keys and sections are rejected") {
  const std::string extra = std::string(kMinimalConfig) + "\n[scenario2]\nx = 1\n";
  CHECK_THROWS_WITH_AS(parse_config_text(extra), doctest::Contains("scenario2"), ConfigError);

  const std::string typo =
      std::string(kMinimalConfig) + "\n[detector]\n";  // duplicate section is fine, but:
  CHECK_THROWS_AS(parse_config_text(std::string(kMinimalConfig) +
                                    "\n[scenario]\nvelocty_floor = 1\n"),
                  ConfigError);
}

TEST_CASE("vector values validate their length") {
  CHECK_THROWS_WITH_AS(parse_config_text(std::string(kMinimalConfig) +
                                         "\n[scenario]\nq_diag = [1, 2]\n"),
                       doctest::Contains("5"), ConfigError);
}

TEST_CASE("custom attacks require their covariance entries") {
  const std::string custom = std::string(kMinimalConfig) + "\n[attack]\ntype = custom\n";
  CHECK_THROWS_WITH_AS(parse_config_text(custom), doctest::Contains("sigma_omega"),
                       ConfigError);
}

TEST_CASE("scenario hash ignores [run] and [attack] but tracks the plant") {
  ScenarioConfig a = parse_config_text(kMinimalConfig);
  ScenarioConfig b = a;
  b.seed = 999;
  b.runs = 3;
  b.attack_kind = AttackKind::Replay;
  b.out_dir = "elsewhere";
  CHECK(a.scenario_hash() == b.scenario_hash());

  ScenarioConfig c = a;
  c.scenario.traj.v_mean = 11.0;
  CHECK(a.scenario_hash() != c.scenario_hash());

  ScenarioConfig d = a;
  d.scenario.window = 22;
  CHECK(a.scenario_hash() != d.scenario_hash());
}

TEST_CASE("duplicate keys in one section are rejected") {
  const char* text = "[scenario]\ndt = 0.05\ndt = 0.1\n";
  CHECK_THROWS_WITH_AS(parse_config_text(text), doctest::Contains("duplicate"), ConfigError);
}

}  // TEST_SUITE
