#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ltvdw/config.hpp"

namespace ltvdw::cli {

// Exit codes shared by the CLI and the command implementations.
constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitAssumptionFailure = 3;
constexpr int kExitValidationFailure = 4;

/// Command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<std::string> attack;        // none | replay | custom
  std::optional<double> attack_start_s;
  std::optional<double> alpha;
  std::optional<std::string> normalization; // analytic | ensemble | lti
  std::optional<std::string> out_dir;
};

/// Loads the config, applies overrides; throws ConfigError on bad values.
ScenarioConfig resolve_config(const std::string& config_path, const Overrides& overrides);

/// synth: builds schedules + gains, writes them with the assumption report
/// under <out>/synth/. Nonzero exit when the report fails.
int cmd_synth(const ScenarioConfig& config);

/// calibrate: simulates `runs` no-attack traces, writes the normalization
/// schedule, the pooled metric CSV and the calibrated threshold under
/// <out>/calib/.
int cmd_calibrate(const ScenarioConfig& config);

/// detect: simulates (optionally attacked) runs against the calibration
/// artifacts, writes trace/metric CSVs and a detection summary.
int cmd_detect(const ScenarioConfig& config);

/// compare: scores one no-attack ensemble under both time-varying and
/// time-invariant normalization, writes per-step mean metrics and the
/// temporal consistency statistics.
int cmd_compare(const ScenarioConfig& config);

/// validate: runs the Monte Carlo validation suite; nonzero exit on any
/// verdict mismatch.
int cmd_validate(const ScenarioConfig& config);

}  // namespace ltvdw::cli
