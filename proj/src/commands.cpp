#include "ltvdw/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <sstream>

#include "ltvdw/attack.hpp"
#include "ltvdw/io.hpp"
#include "ltvdw/linalg.hpp"
#include "ltvdw/validation.hpp"

namespace ltvdw::cli {

namespace {

// Seed stream bases keep calibration, detection and comparison ensembles
// statistically independent while remaining reproducible from one root seed.
constexpr std::uint64_t kCalibrateStream = 100;
constexpr std::uint64_t kDetectStream = 200;
constexpr std::uint64_t kCompareStream = 300;
constexpr std::uint64_t kValidateStream = 400;

std::string synth_dir(const ScenarioConfig& c) { return c.out_dir + "/synth"; }
std::string calib_dir(const ScenarioConfig& c) { return c.out_dir + "/calib"; }

void write_hash(const std::string& dir, const ScenarioConfig& c) {
  atomic_write_file(dir + "/config_hash.txt", c.scenario_hash() + "\n");
}

bool hash_matches(const std::string& dir, const ScenarioConfig& c) {
  if (!file_exists(dir + "/config_hash.txt")) return false;
  std::string stored = read_file(dir + "/config_hash.txt");
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
  return stored == c.scenario_hash();
}

std::optional<AttackConfig> make_attack(const ScenarioConfig& cfg, const Scenario& scenario,
                                        int* start_step_out) {
  const int start_step =
      static_cast<int>(std::llround(cfg.attack_start_s / scenario.dt()));
  if (start_step_out) *start_step_out = start_step;
  switch (cfg.attack_kind) {
    case AttackKind::None:
      return std::nullopt;
    case AttackKind::Replay:
      return replay_preset(scenario.sys, scenario.noise, scenario.gains, start_step);
    case AttackKind::Custom: {
      AttackConfig a;
      a.alpha = cfg.attack_alpha;
      a.start_step = start_step;
      const Eigen::MatrixXd so = cfg.attack_sigma_omega.cwiseAbs2().asDiagonal();
      const Eigen::MatrixXd sz = cfg.attack_sigma_zeta.cwiseAbs2().asDiagonal();
      a.Sigma_omega.assign(scenario.horizon(), so);
      a.Sigma_zeta.assign(scenario.horizon(), sz);
      return a;
    }
  }
  return std::nullopt;
}

std::vector<Eigen::MatrixXd> expand_constant(const std::vector<Eigen::MatrixXd>& seq,
                                             int horizon) {
  if (static_cast<int>(seq.size()) >= horizon) return seq;
  if (seq.size() == 1) return std::vector<Eigen::MatrixXd>(horizon, seq[0]);
  throw std::runtime_error("normalization schedule shorter than horizon");
}

struct Calibration {
  std::vector<Eigen::MatrixXd> V;
  double threshold = 0.0;
};

Calibration load_calibration(const ScenarioConfig& cfg, int horizon) {
  const std::string dir = calib_dir(cfg);
  if (!file_exists(dir + "/V.csv") || !file_exists(dir + "/threshold.txt")) {
    throw ConfigError("calibration artifacts missing in " + dir + "; run calibrate first");
  }
  if (!hash_matches(dir, cfg)) {
    throw ConfigError("calibration artifacts in " + dir +
                      " were produced from a different config (hash mismatch); re-run calibrate");
  }
  Calibration cal;
  cal.V = expand_constant(matrix_schedule_from_csv(read_file(dir + "/V.csv")), horizon);
  const auto kv = kv_from_text(read_file(dir + "/threshold.txt"));
  const auto it = kv.find("threshold");
  if (it == kv.end()) throw ConfigError("threshold.txt is missing the threshold entry");
  cal.threshold = it->second == "inf" ? std::numeric_limits<double>::infinity()
                                      : std::stod(it->second);
  return cal;
}

std::string trajectory_to_csv(const ReferenceTrajectory& traj) {
  std::ostringstream os;
  os << "n,t,x,y,psi,v,psi_dot,a,psi_ddot\n";
  for (size_t n = 0; n < traj.samples.size(); ++n) {
    const auto& s = traj.samples[n];
    os << n << "," << format_double(n * traj.dt) << "," << format_double(s.x) << ","
       << format_double(s.y) << "," << format_double(s.psi) << "," << format_double(s.v)
       << "," << format_double(s.psi_dot) << "," << format_double(s.a) << ","
       << format_double(s.psi_ddot) << "\n";
  }
  return os.str();
}

double coefficient_of_variation(const std::vector<double>& values) {
  double sum = 0.0;
  long count = 0;
  for (double v : values) {
    if (std::isfinite(v)) { sum += v; ++count; }
  }
  if (count < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mean = sum / count;
  double ss = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) ss += (v - mean) * (v - mean);
  }
  return std::sqrt(ss / (count - 1)) / std::abs(mean);
}

}  // namespace

ScenarioConfig resolve_config(const std::string& config_path, const Overrides& overrides) {
  ScenarioConfig cfg = load_config(config_path);
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.runs) {
    if (*overrides.runs < 1) throw ConfigError("--runs must be >= 1");
    cfg.runs = *overrides.runs;
  }
  if (overrides.attack) {
    const std::string& a = *overrides.attack;
    if (a == "none") cfg.attack_kind = AttackKind::None;
    else if (a == "replay") cfg.attack_kind = AttackKind::Replay;
    else if (a == "custom") cfg.attack_kind = AttackKind::Custom;
    else throw ConfigError("unknown --attack value '" + a + "'");
  }
  if (overrides.attack_start_s) cfg.attack_start_s = *overrides.attack_start_s;
  if (overrides.alpha) cfg.attack_alpha = *overrides.alpha;
  if (overrides.normalization) {
    const std::string& m = *overrides.normalization;
    if (m == "analytic") cfg.normalization = NormalizationMode::Analytic;
    else if (m == "ensemble") cfg.normalization = NormalizationMode::Ensemble;
    else if (m == "lti") cfg.normalization = NormalizationMode::Lti;
    else throw ConfigError("unknown --normalization value '" + m + "'");
  }
  if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
  if (cfg.attack_kind == AttackKind::Custom &&
      (cfg.attack_sigma_omega.size() != 5 || cfg.attack_sigma_zeta.size() != 5)) {
    throw ConfigError("custom attacks need sigma_omega and sigma_zeta in the [attack] section");
  }
  return cfg;
}

int cmd_synth(const ScenarioConfig& cfg) {
  const Scenario scenario = build_car_scenario(cfg.scenario);
  const std::string dir = synth_dir(cfg);
  ensure_directory(dir);

  const int N = scenario.horizon();
  atomic_write_file(dir + "/A.csv", matrix_schedule_to_csv("A", scenario.sys.A));
  atomic_write_file(dir + "/B.csv", matrix_schedule_to_csv("B", scenario.sys.B));
  atomic_write_file(dir + "/C.csv", matrix_schedule_to_csv("C", scenario.sys.C));
  atomic_write_file(dir + "/K.csv", matrix_schedule_to_csv("K", scenario.gains.K));
  atomic_write_file(dir + "/L.csv", matrix_schedule_to_csv("L", scenario.gains.L));
  atomic_write_file(dir + "/Sigma_w.csv",
                    matrix_schedule_to_csv("Sigma_w", scenario.noise.Sigma_w));
  atomic_write_file(dir + "/Sigma_z.csv",
                    matrix_schedule_to_csv("Sigma_z", scenario.noise.Sigma_z));
  atomic_write_file(dir + "/Sigma_e.csv",
                    matrix_schedule_to_csv("Sigma_e", {scenario.noise.Sigma_e}));
  atomic_write_file(dir + "/trajectory.csv", trajectory_to_csv(scenario.trajectory));
  atomic_write_file(dir + "/assumptions.txt", scenario.report.summary());
  write_hash(dir, cfg);

  std::cout << "synth: horizon " << N << " steps, dt " << scenario.dt() << " s\n"
            << scenario.report.summary();
  if (!scenario.report.pass) {
    std::cerr << "synth: assumption check FAILED\n";
    return kExitAssumptionFailure;
  }
  return kExitOk;
}

int cmd_calibrate(const ScenarioConfig& cfg) {
  if (!file_exists(synth_dir(cfg) + "/assumptions.txt")) {
    throw ConfigError("synth artifacts missing in " + synth_dir(cfg) + "; run synth first");
  }
  if (!hash_matches(synth_dir(cfg), cfg)) {
    throw ConfigError("synth artifacts were produced from a different config; re-run synth");
  }
  const Scenario scenario = build_car_scenario(cfg.scenario);
  const int N = scenario.horizon();
  if (cfg.normalization == NormalizationMode::Ensemble && cfg.runs < scenario.sys.r()) {
    throw ConfigError("ensemble normalization needs at least r = " +
                      std::to_string(scenario.sys.r()) + " runs, got " +
                      std::to_string(cfg.runs));
  }

  const std::uint64_t root = derive_seed(cfg.seed, kCalibrateStream);
  std::vector<DetectionTrace> traces;
  traces.reserve(cfg.runs);
  for (int j = 0; j < cfg.runs; ++j) {
    traces.push_back(simulate(scenario.sys, scenario.noise, scenario.gains, nullptr, N,
                              derive_seed(root, j)));
  }

  NormalizationSchedule norm;
  bool constant_v = false;
  switch (cfg.normalization) {
    case NormalizationMode::Analytic:
      norm = analytic_normalization(scenario.sys, scenario.gains, scenario.noise, N);
      break;
    case NormalizationMode::Ensemble:
      norm = estimate_normalization_ensemble(traces, scenario.sys.C);
      break;
    case NormalizationMode::Lti:
      norm.V.assign(1, lti_baseline_normalization(traces));
      constant_v = true;
      break;
  }
  const std::vector<Eigen::MatrixXd> V_full = expand_constant(norm.V, N);

  DetectorConfig det = scenario.detector;  // threshold still +inf
  std::vector<double> pooled;
  std::ostringstream pool_csv;
  pool_csv << "run,n,t,metric\n";
  for (int j = 0; j < cfg.runs; ++j) {
    const MetricSeries series = score_trace(traces[j], V_full, det);
    for (size_t n = 0; n < series.metric.size(); ++n) {
      if (std::isnan(series.metric[n])) continue;
      pooled.push_back(series.metric[n]);
      pool_csv << j << "," << n << "," << format_double(n * scenario.dt()) << ","
               << format_double(series.metric[n]) << "\n";
    }
  }
  double threshold = 0.0;
  try {
    threshold = calibrate_threshold(pooled, scenario.dt(), cfg.scenario.target_rate_per_s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("calibration impossible with this run count: ") + e.what());
  }

  const std::string dir = calib_dir(cfg);
  ensure_directory(dir);
  atomic_write_file(dir + "/V.csv",
                    matrix_schedule_to_csv("V", constant_v ? norm.V : V_full));
  atomic_write_file(dir + "/metrics_noattack.csv", pool_csv.str());
  atomic_write_file(
      dir + "/threshold.txt",
      kv_to_text({{"threshold", std::isinf(threshold) ? "inf" : format_double(threshold)},
                  {"quantile", format_double(1.0 - scenario.dt() * cfg.scenario.target_rate_per_s)},
                  {"samples", std::to_string(pooled.size())},
                  {"target_rate_per_s", format_double(cfg.scenario.target_rate_per_s)},
                  {"normalization", to_string(cfg.normalization)},
                  {"runs", std::to_string(cfg.runs)}}));
  write_hash(dir, cfg);

  std::cout << "calibrate: " << cfg.runs << " runs, " << pooled.size()
            << " metric samples, threshold " << threshold << "\n";
  return kExitOk;
}

int cmd_detect(const ScenarioConfig& cfg) {
  const Scenario scenario = build_car_scenario(cfg.scenario);
  const int N = scenario.horizon();
  const Calibration cal = load_calibration(cfg, N);

  DetectorConfig det = scenario.detector;
  det.threshold = cal.threshold;

  int start_step = 0;
  const std::optional<AttackConfig> attack = make_attack(cfg, scenario, &start_step);
  const bool attacked = attack.has_value();
  if (attacked && start_step >= N) {
    std::cerr << "warning: attack start " << cfg.attack_start_s
              << " s is beyond the horizon; running clean\n";
  }

  const std::uint64_t root = derive_seed(cfg.seed, kDetectStream);
  std::vector<double> delays_s;
  int detected = 0;
  long total_events = 0;
  DetectionTrace first_trace;
  MetricSeries first_series;

  for (int j = 0; j < cfg.runs; ++j) {
    std::unique_ptr<GeneralizedReplayAttack> attacker;
    if (attacked) {
      attacker = std::make_unique<GeneralizedReplayAttack>(*attack, scenario.sys,
                                                           scenario.gains);
    }
    DetectionTrace trace = simulate(scenario.sys, scenario.noise, scenario.gains,
                                    attacker.get(), N, derive_seed(root, j));
    const MetricSeries series = score_trace(trace, cal.V, det, &trace);
    total_events += series.num_events;
    if (attacked && start_step < N) {
      // first alarm at or after the attack start
      int hit = -1;
      for (int n = std::max(start_step, 0); n < N; ++n) {
        if (series.alarm[n]) { hit = n; break; }
      }
      if (hit >= 0) {
        ++detected;
        delays_s.push_back((hit - start_step) * scenario.dt());
      }
    }
    if (j == 0) {
      first_trace = std::move(trace);
      first_series = series;
    }
  }

  const std::string dir = cfg.out_dir + "/detect";
  ensure_directory(dir);
  atomic_write_file(dir + "/trace.csv", trace_to_csv(first_trace));
  atomic_write_file(dir + "/metrics.csv",
                    metric_series_to_csv(first_series, scenario.dt(), cal.threshold));

  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("runs", std::to_string(cfg.runs));
  kv.emplace_back("attack", to_string(cfg.attack_kind));
  kv.emplace_back("threshold", format_double(cal.threshold));
  kv.emplace_back("alarm_events_total", std::to_string(total_events));
  kv.emplace_back("alarm_events_per_run",
                  format_double(static_cast<double>(total_events) / cfg.runs));
  const double run_seconds = N * scenario.dt();
  kv.emplace_back("alarm_events_per_50s",
                  format_double(static_cast<double>(total_events) / cfg.runs *
                                (50.0 / run_seconds)));
  if (attacked) {
    kv.emplace_back("attack_start_s", format_double(start_step * scenario.dt()));
    kv.emplace_back("attack_start_step", std::to_string(start_step));
    kv.emplace_back("detected_runs", std::to_string(detected));
    kv.emplace_back("detection_rate",
                    format_double(static_cast<double>(detected) / cfg.runs));
    if (!delays_s.empty()) {
      std::vector<double> sorted = delays_s;
      std::sort(sorted.begin(), sorted.end());
      kv.emplace_back("median_delay_s", format_double(sorted[sorted.size() / 2]));
      kv.emplace_back("first_run_first_alarm_step",
                      std::to_string(first_series.first_alarm_step));
    }
  }
  const std::string summary = kv_to_text(kv);
  atomic_write_file(dir + "/summary.txt", summary);
  std::cout << summary;
  return kExitOk;
}

int cmd_compare(const ScenarioConfig& cfg) {
  const Scenario scenario = build_car_scenario(cfg.scenario);
  const int N = scenario.horizon();
  (void)load_calibration(cfg, N);  // pipeline discipline: calibrate must have run

  const std::uint64_t root = derive_seed(cfg.seed, kCompareStream);
  std::vector<DetectionTrace> traces;
  traces.reserve(cfg.runs);
  for (int j = 0; j < cfg.runs; ++j) {
    traces.push_back(simulate(scenario.sys, scenario.noise, scenario.gains, nullptr, N,
                              derive_seed(root, j)));
  }

  const NormalizationSchedule ltv =
      analytic_normalization(scenario.sys, scenario.gains, scenario.noise, N);
  const std::vector<Eigen::MatrixXd> V_lti(N, lti_baseline_normalization(traces));

  DetectorConfig det = scenario.detector;
  std::vector<double> mean_ltv(N, 0.0), mean_lti(N, 0.0);
  std::vector<long> counts(N, 0);
  for (const auto& trace : traces) {
    const MetricSeries a = score_trace(trace, ltv.V, det);
    const MetricSeries b = score_trace(trace, V_lti, det);
    for (int n = 0; n < N; ++n) {
      if (std::isnan(a.metric[n]) || std::isnan(b.metric[n])) continue;
      mean_ltv[n] += a.metric[n];
      mean_lti[n] += b.metric[n];
      ++counts[n];
    }
  }
  std::ostringstream csv;
  csv << "n,t,mean_metric_ltv,mean_metric_lti\n";
  std::vector<double> series_ltv, series_lti;
  for (int n = 0; n < N; ++n) {
    csv << n << "," << format_double(n * scenario.dt()) << ",";
    if (counts[n] > 0) {
      const double a = mean_ltv[n] / counts[n];
      const double b = mean_lti[n] / counts[n];
      series_ltv.push_back(a);
      series_lti.push_back(b);
      csv << format_double(a) << "," << format_double(b) << "\n";
    } else {
      csv << ",\n";
    }
  }
  const double cov_ltv = coefficient_of_variation(series_ltv);
  const double cov_lti = coefficient_of_variation(series_lti);

  const std::string dir = cfg.out_dir + "/compare";
  ensure_directory(dir);
  atomic_write_file(dir + "/compare.csv", csv.str());
  const std::string stats =
      kv_to_text({{"runs", std::to_string(cfg.runs)},
                  {"cov_ltv", format_double(cov_ltv)},
                  {"cov_lti", format_double(cov_lti)},
                  {"cov_ratio_ltv_over_lti", format_double(cov_ltv / cov_lti)}});
  atomic_write_file(dir + "/stats.txt", stats);
  std::cout << stats;
  return kExitOk;
}

int cmd_validate(const ScenarioConfig& cfg) {
  const std::uint64_t root = derive_seed(cfg.seed, kValidateStream);
  ScalarScenarioParams sp;
  const Scenario scalar = build_scalar_scenario(sp);
  const std::vector<long> sizes = {1000, 10000, 100000};
  const int reps = 16;

  const std::string dir = cfg.out_dir + "/validate";
  ensure_directory(dir);
  bool ok = true;

  // No attack: both statistics must converge.
  const auto [c1, c2] =
      check_c1_c2(scalar, std::nullopt, sizes, reps, derive_seed(root, 1));
  atomic_write_file(dir + "/c1_noattack.txt", c1.to_text());
  atomic_write_file(dir + "/c2_noattack.txt", c2.to_text());
  ok = ok && c1.converging && c2.converging;

  // Replay attack: the pair cannot both converge.
  const AttackConfig replay =
      replay_preset(scalar.sys, scalar.noise, scalar.gains, 0);
  const auto [c1a, c2a] = check_c1_c2(scalar, replay, sizes, reps, derive_seed(root, 2));
  atomic_write_file(dir + "/c1_replay.txt", c1a.to_text());
  atomic_write_file(dir + "/c2_replay.txt", c2a.to_text());
  ok = ok && !(c1a.converging && c2a.converging);

  // Attack scaling factor sweep.
  const AlphaSweepReport alpha =
      check_alpha_iff_c1(scalar, {0.0, -1.0, 0.25}, sizes, reps, derive_seed(root, 3));
  atomic_write_file(dir + "/alpha_sweep.txt", alpha.to_text());
  ok = ok && alpha.pass;

  // Window matrix distribution under no attack.
  const WishartWindowReport wishart =
      check_wishart_window(scalar, 20, 5000, derive_seed(root, 4));
  atomic_write_file(dir + "/wishart_window.txt", wishart.to_text());
  const bool wishart_ok = wishart.max_rel_mean_error < 0.05 && wishart.ks_distance < 0.05;
  ok = ok && wishart_ok;

  const std::string summary = kv_to_text(
      {{"c1_noattack", c1.converging ? "converging" : "non-converging"},
       {"c2_noattack", c2.converging ? "converging" : "non-converging"},
       {"replay_rejected", !(c1a.converging && c2a.converging) ? "true" : "false"},
       {"alpha_sweep_pass", alpha.pass ? "true" : "false"},
       {"wishart_mean_rel_error", format_double(wishart.max_rel_mean_error)},
       {"wishart_ks_distance", format_double(wishart.ks_distance)},
       {"pass", ok ? "true" : "false"}});
  atomic_write_file(dir + "/summary.txt", summary);
  std::cout << summary;
  return ok ? kExitOk : kExitValidationFailure;
}

}  // namespace ltvdw::cli
