#include <CLI11.hpp>
#include <iostream>

#include "ltvdw/commands.hpp"

using namespace ltvdw;

int main(int argc, char** argv) {
  CLI::App app{"Dynamic watermarking for linear time-varying control loops"};
  app.require_subcommand(1);

  std::string config_path;
  cli::Overrides ov;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--seed", ov.seed, "root seed override");
    sub->add_option("--runs", ov.runs, "Monte Carlo run count override");
    sub->add_option("--out", ov.out_dir, "output directory override");
  };

  CLI::App* synth = app.add_subcommand("synth", "build schedules, gains and the assumption report");
  add_common(synth);

  CLI::App* calibrate =
      app.add_subcommand("calibrate", "estimate normalization and calibrate the alarm threshold");
  add_common(calibrate);
  calibrate->add_option("--normalization", ov.normalization,
                        "normalization mode: analytic | ensemble | lti");

  CLI::App* detect = app.add_subcommand("detect", "run detection against calibrated artifacts");
  add_common(detect);
  detect->add_option("--attack", ov.attack, "attack preset: none | replay | custom");
  detect->add_option("--attack-start", ov.attack_start_s, "attack start time, seconds");
  detect->add_option("--alpha", ov.alpha, "attack scaling factor (custom attacks)");

  CLI::App* compare =
      app.add_subcommand("compare", "time-varying vs time-invariant normalization consistency");
  add_common(compare);

  CLI::App* validate = app.add_subcommand("validate", "Monte Carlo validation suite");
  add_common(validate);

  CLI11_PARSE(app, argc, argv);

  try {
    const ScenarioConfig cfg = cli::resolve_config(config_path, ov);
    if (synth->parsed()) return cli::cmd_synth(cfg);
    if (calibrate->parsed()) return cli::cmd_calibrate(cfg);
    if (detect->parsed()) return cli::cmd_detect(cfg);
    if (compare->parsed()) return cli::cmd_compare(cfg);
    if (validate->parsed()) return cli::cmd_validate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
