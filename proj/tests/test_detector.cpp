#include <doctest.h>

#include <cmath>

#include "ltvdw/attack.hpp"
#include "ltvdw/detector.hpp"
#include "ltvdw/linalg.hpp"
#include "ltvdw/scenario.hpp"
#include "ltvdw/validation.hpp"
#include "test_helpers.hpp"

using namespace ltvdw;
using namespace ltvdw::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Brute-force evaluation of the observer-error covariance as the explicit
// sum over noise injections, independent of the recursion:
//   Sigma_n = sum_{j=0}^{n-1} Phi(n-1, j+1) (Sw_j + L_j Sz_j L_j^T) Phi^T
// with Phi the product of (A + LC) factors and the empty product = I.
MatrixXd sigma_delta_sum_oracle(const StateSpaceSchedule& sys, const GainSchedule& gains,
                                const NoiseSchedule& noise, int n) {
  const int p = sys.p();
  MatrixXd sum = MatrixXd::Zero(p, p);
  for (int j = 0; j < n; ++j) {
    MatrixXd phi = MatrixXd::Identity(p, p);
    for (int k = j + 1; k <= n - 1; ++k) {
      phi = (sys.A[k] + gains.L[k] * sys.C[k]) * phi;
    }
    const MatrixXd inj =
        noise.Sigma_w[j] + gains.L[j] * noise.Sigma_z[j] * gains.L[j].transpose();
    sum += phi * inj * phi.transpose();
  }
  return sum;
}

}  // namespace

TEST_SUITE("detector") {

TEST_CASE("error covariance starts at zero and takes the one-term value at n=1") {
  Rng rng(3);
  auto loop = random_stable_loop(3, 12, rng);
  const auto sigma = propagate_error_covariance(loop.sys, loop.gains, loop.noise, 12);
  CHECK(sigma[0].cwiseAbs().maxCoeff() == 0.0);
  const MatrixXd expected =
      loop.noise.Sigma_w[0] +
      loop.gains.L[0] * loop.noise.Sigma_z[0] * loop.gains.L[0].transpose();
  CHECK((sigma[1] - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scalar error covariance fixed point 5/3") {
  // A+LC = 0.5, Sw = 1, L Sz L^T = 0.25: fixed point (1 + 0.25) / (1 - 0.25)
  auto loop = const_loop(m1(1.0), m1(1.0), m1(1.0), m1(0.0), m1(-0.5),
                         m1(1.0), m1(1.0), m1(1.0), 400);
  const auto sigma = propagate_error_covariance(loop.sys, loop.gains, loop.noise, 400);
  CHECK(sigma.back()(0, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("recursion equals the brute-force sum on a random stable 3-state system") {
  Rng rng(17);
  auto loop = random_stable_loop(3, 11, rng);
  const auto sigma = propagate_error_covariance(loop.sys, loop.gains, loop.noise, 11);
  const MatrixXd oracle = sigma_delta_sum_oracle(loop.sys, loop.gains, loop.noise, 10);
  CHECK((sigma[10] - oracle).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("normalization factor trivial values") {
  CHECK((normalization_factor(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2),
                              MatrixXd::Identity(2, 2)) -
         MatrixXd::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK(normalization_factor(m1(3.0), m1(1.0), m1(1.0))(0, 0) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("normalization factor satisfies its defining identity on random SPD input") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    MatrixXd g(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) g(i, j) = rng.normal();
    const MatrixXd sd = g * g.transpose() + 0.2 * MatrixXd::Identity(3, 3);
    const MatrixXd C = MatrixXd::Identity(3, 3);
    const MatrixXd sz = 0.5 * MatrixXd::Identity(3, 3);
    const MatrixXd V = normalization_factor(sd, C, sz);
    const MatrixXd m = C * sd * C.transpose() + sz;
    CHECK((V * m * V.transpose() - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("normalization factor rejects indefinite input") {
  MatrixXd indef(2, 2);
  indef << 1.0, 0.0, 0.0, -0.5;
  CHECK_THROWS_AS(normalization_factor(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2), indef),
                  std::invalid_argument);
}

TEST_CASE("ensemble estimate is consistent with the analytic whitener (i = 1e4, 2%)") {
  ScalarScenarioParams sp;
  sp.horizon = 60;
  const Scenario s = build_scalar_scenario(sp);
  std::vector<DetectionTrace> traces;
  traces.reserve(10000);
  for (int j = 0; j < 10000; ++j) {
    traces.push_back(simulate(s.sys, s.noise, s.gains, nullptr, 60, derive_seed(400, j)));
  }
  const NormalizationSchedule est = estimate_normalization_ensemble(traces, s.sys.C);
  const NormalizationSchedule ana = analytic_normalization(s.sys, s.gains, s.noise, 60);
  // steady-state step
  CHECK(est.V[59](0, 0) == doctest::Approx(ana.V[59](0, 0)).epsilon(0.02));
}

TEST_CASE("ensemble estimate: too few traces for the rank is an error") {
  CarScenarioParams params = CarScenarioParams::defaults();
  params.traj.duration_s = 2.0;
  const Scenario car = build_car_scenario(params);
  std::vector<DetectionTrace> traces;
  for (int j = 0; j < 3; ++j) {
    traces.push_back(
        simulate(car.sys, car.noise, car.gains, nullptr, car.horizon(), derive_seed(1, j)));
  }
  CHECK_THROWS_AS(estimate_normalization_ensemble(traces, car.sys.C), std::invalid_argument);
}

TEST_CASE("degenerate ensemble rides the ridge instead of failing") {
  // identical residuals across the ensemble: rank-1 sample covariance
  DetectionTrace t;
  t.dt = 1.0;
  t.residual.assign(4, (VectorXd(1) << 0.5).finished());
  t.e.assign(4, VectorXd::Zero(1));
  t.y.assign(4, VectorXd::Zero(1));
  std::vector<DetectionTrace> traces(3, t);
  const std::vector<MatrixXd> C(4, m1(1.0));
  const NormalizationSchedule est = estimate_normalization_ensemble(traces, C);
  CHECK(std::isfinite(est.V[0](0, 0)));
  CHECK(est.V[0](0, 0) > 0.0);
}

TEST_CASE("car-scale ensemble (i = 100) agrees with the analytic whitener within 30%") {
  CarScenarioParams params = CarScenarioParams::defaults();
  params.traj.duration_s = 10.0;
  const Scenario car = build_car_scenario(params);
  const int N = car.horizon();
  std::vector<DetectionTrace> traces;
  traces.reserve(100);
  for (int j = 0; j < 100; ++j) {
    traces.push_back(
        simulate(car.sys, car.noise, car.gains, nullptr, N, derive_seed(2000, j)));
  }
  const NormalizationSchedule est = estimate_normalization_ensemble(traces, car.sys.C);
  const NormalizationSchedule ana = analytic_normalization(car.sys, car.gains, car.noise, N);
  const int n = N - 1;
  const double scale = ana.V[n].cwiseAbs().maxCoeff();
  CHECK((est.V[n] - ana.V[n]).cwiseAbs().maxCoeff() < 0.3 * scale);
}

TEST_CASE("wishart_nll reproduces the closed-form value at Q = S") {
  // q = r = 1, window 21 (ell = 20), S = I2: (2 - 20) log|I| + tr(I) = 2
  const MatrixXd S = MatrixXd::Identity(2, 2);
  CHECK(wishart_nll(S, S.inverse(), 1, 1, 20) == doctest::Approx(2.0).epsilon(1e-12));
  // with a non-identity scale the log-det term engages
  MatrixXd S2 = MatrixXd::Identity(2, 2);
  S2(1, 1) = 2.0;
  const double expected = (1 + 1 - 20) * std::log(2.0) + 2.0;
  CHECK(wishart_nll(S2, S2.inverse(), 1, 1, 20) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("push_and_score stays pending until the window fills, then alarms on threshold") {
  DetectorConfig cfg;
  cfg.window = 4;
  cfg.watermark_delay = 1;
  cfg.S = make_scale_matrix(1, m1(1.0));
  cfg.threshold = -1e9;  // everything alarms once scored

  WindowStatistic stat(2, cfg.window);
  Rng rng(8);
  for (int i = 0; i < 3; ++i) {
    const ScoreResult res = push_and_score(stat, (VectorXd(1) << rng.normal()).finished(),
                                           m1(1.0), (VectorXd(1) << rng.normal()).finished(),
                                           cfg);
    CHECK_FALSE(res.metric.has_value());
    CHECK_FALSE(res.alarm);
  }
  const ScoreResult res = push_and_score(stat, (VectorXd(1) << rng.normal()).finished(),
                                         m1(1.0), (VectorXd(1) << rng.normal()).finished(),
                                         cfg);
  CHECK(res.metric.has_value());
  CHECK(res.alarm);
}

TEST_CASE("degenerate window determinant is clamped and flagged") {
  DetectorConfig cfg;
  cfg.window = 2;  // q + r = 2 boundary window, rank-deficient with repeated psi
  cfg.S = make_scale_matrix(1, m1(1.0));
  WindowStatistic stat(2, 2);
  const VectorXd resid = (VectorXd(1) << 1.0).finished();
  const VectorXd e = (VectorXd(1) << 1.0).finished();
  push_and_score(stat, resid, m1(1.0), e, cfg);
  const ScoreResult res = push_and_score(stat, resid, m1(1.0), e, cfg);
  REQUIRE(res.metric.has_value());
  CHECK(res.degenerate);
  CHECK(std::isfinite(*res.metric));
}

TEST_CASE("sliding Q equals a from-scratch recomputation at every step") {
  Rng rng(12);
  WindowStatistic stat(3, 7);
  std::vector<VectorXd> history;
  for (int i = 0; i < 40; ++i) {
    const VectorXd psi = rng.normal_vector(3);
    history.push_back(psi);
    stat.push(psi);
    MatrixXd expected = MatrixXd::Zero(3, 3);
    const int lo = std::max(0, i - 6);
    for (int j = lo; j <= i; ++j) expected += history[j] * history[j].transpose();
    CHECK((stat.Q() - expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("metric is invariant under orthogonal maps commuting with S") {
  // r = 2 residual block of S is I2: any rotation on that block commutes.
  const MatrixXd Se = m1(2.0);
  const MatrixXd S = make_scale_matrix(2, Se);
  const MatrixXd S_inv = S.inverse();
  const double theta = 0.83;
  MatrixXd G = MatrixXd::Identity(3, 3);
  G(0, 0) = std::cos(theta);
  G(0, 1) = -std::sin(theta);
  G(1, 0) = std::sin(theta);
  G(1, 1) = std::cos(theta);
  CHECK((G * S * G.transpose() - S).cwiseAbs().maxCoeff() < 1e-12);

  Rng rng(31);
  MatrixXd Q = MatrixXd::Zero(3, 3);
  for (int i = 0; i < 25; ++i) {
    const VectorXd psi = rng.normal_vector(3);
    Q += psi * psi.transpose();
  }
  const double a = wishart_nll(Q, S_inv, 1, 2, 24);
  const double b = wishart_nll(G * Q * G.transpose(), S_inv, 1, 2, 24);
  CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("long-run mean metric matches the synthetic Wishart oracle within 5%") {
  // scalar loop, window 21: psi is iid at the stationary Kalman gain, so the
  // window matrix is exactly Wishart(S, 21).
  ScalarScenarioParams sp;
  sp.horizon = 40000;
  const Scenario s = build_scalar_scenario(sp);
  const NormalizationSchedule norm =
      analytic_normalization(s.sys, s.gains, s.noise, sp.horizon);
  const DetectionTrace trace =
      simulate(s.sys, s.noise, s.gains, nullptr, sp.horizon, 606);
  const MetricSeries series = score_trace(trace, norm.V, s.detector);
  double mean = 0.0;
  long count = 0;
  for (int n = 2000; n < sp.horizon; ++n) {
    if (!std::isnan(series.metric[n])) {
      mean += series.metric[n];
      ++count;
    }
  }
  mean /= count;

  Rng rng(919);
  const MatrixXd S_factor = sqrt_factor_psd(s.detector.S);
  const MatrixXd S_inv = s.detector.S.inverse();
  double oracle = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    oracle += wishart_nll(sample_wishart(S_factor, 21, rng), S_inv, 1, 1, 20);
  }
  oracle /= draws;
  CHECK(mean == doctest::Approx(oracle).epsilon(0.05));
}

TEST_CASE("car long-run mean metric matches the Wishart oracle within 5%") {
  CarScenarioParams params = CarScenarioParams::defaults();
  params.traj.duration_s = 25.0;
  const Scenario car = build_car_scenario(params);
  const int N = car.horizon();
  const NormalizationSchedule norm =
      analytic_normalization(car.sys, car.gains, car.noise, N);

  double mean = 0.0;
  long count = 0;
  for (int j = 0; j < 25; ++j) {
    const DetectionTrace trace =
        simulate(car.sys, car.noise, car.gains, nullptr, N, derive_seed(606, j));
    const MetricSeries series = score_trace(trace, norm.V, car.detector);
    for (int n = 100; n < N; ++n) {
      if (!std::isnan(series.metric[n])) {
        mean += series.metric[n];
        ++count;
      }
    }
  }
  mean /= count;

  Rng rng(920);
  const MatrixXd S_factor = sqrt_factor_psd(car.detector.S);
  const MatrixXd S_inv = car.detector.S.inverse();
  double oracle = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    oracle += wishart_nll(sample_wishart(S_factor, 21, rng), S_inv, car.sys.q(),
                          car.sys.r(), 20);
  }
  oracle /= draws;
  CHECK(mean == doctest::Approx(oracle).epsilon(0.05));
}

TEST_CASE("threshold calibration hits the right quantile of a uniform sample") {
  Rng rng(14);
  std::vector<double> samples;
  samples.reserve(100000);
  for (int i = 0; i < 100000; ++i) samples.push_back(rng.uniform01());
  // dt * rate = 0.001 -> 0.999 quantile
  const double thr = calibrate_threshold(samples, 0.05, 1.0 / 50.0);
  CHECK(thr == doctest::Approx(0.999).epsilon(0.002));
}

TEST_CASE("threshold calibration edge cases") {
  CHECK(calibrate_threshold({1.0, 2.0}, 0.05, 0.0) ==
        std::numeric_limits<double>::infinity());
  std::vector<double> few(10, 0.5);
  CHECK_THROWS_WITH_AS(calibrate_threshold(few, 0.05, 1.0 / 50.0),
                       doctest::Contains("1000"), std::invalid_argument);
}

TEST_CASE("lti baseline equals the analytic steady-state whitener on an LTI loop") {
  ScalarScenarioParams sp;
  sp.horizon = 20000;
  const Scenario s = build_scalar_scenario(sp);
  std::vector<DetectionTrace> traces;
  for (int j = 0; j < 4; ++j) {
    traces.push_back(
        simulate(s.sys, s.noise, s.gains, nullptr, sp.horizon, derive_seed(3000, j)));
  }
  const MatrixXd V = lti_baseline_normalization(traces);
  const NormalizationSchedule ana = analytic_normalization(s.sys, s.gains, s.noise, sp.horizon);
  CHECK(V(0, 0) == doctest::Approx(ana.V.back()(0, 0)).epsilon(0.03));
  CHECK(V(0, 0) > 0.0);  // symmetric positive definite in the scalar case
}

TEST_CASE("asymptotic statistics: no attack vs alpha = 0.5 vs replay") {
  ScalarScenarioParams sp;
  sp.horizon = 100000;
  const Scenario s = build_scalar_scenario(sp);
  const NormalizationSchedule norm =
      analytic_normalization(s.sys, s.gains, s.noise, sp.horizon);

  const DetectionTrace clean =
      simulate(s.sys, s.noise, s.gains, nullptr, sp.horizon, 71);
  const AsymptoticStats base = asymptotic_statistics(clean, norm.V, s.sys.C);
  const double c1_base = base.C1.cwiseAbs().maxCoeff();
  CHECK(c1_base < 0.02);
  CHECK(std::abs(base.C2(0, 0) - 1.0) < 0.05);

  AttackConfig half;
  half.alpha = 0.5;
  half.start_step = 0;
  half.Sigma_omega.assign(sp.horizon, m1(0.0));
  half.Sigma_zeta.assign(sp.horizon, m1(0.0));
  GeneralizedReplayAttack attacker(half, s.sys, s.gains);
  const DetectionTrace attacked =
      simulate(s.sys, s.noise, s.gains, &attacker, sp.horizon, 72);
  const AsymptoticStats stats = asymptotic_statistics(attacked, norm.V, s.sys.C);
  CHECK(stats.C1.cwiseAbs().maxCoeff() > 5.0 * c1_base);

  const AttackConfig preset = replay_preset(s.sys, s.noise, s.gains, 0);
  GeneralizedReplayAttack replayer(preset, s.sys, s.gains);
  const DetectionTrace replayed =
      simulate(s.sys, s.noise, s.gains, &replayer, sp.horizon, 73);
  const AsymptoticStats rstats = asymptotic_statistics(replayed, norm.V, s.sys.C);
  const double c2_dev_base = std::abs(base.C2(0, 0) - 1.0);
  CHECK(std::abs(rstats.C2(0, 0) - 1.0) > 10.0 * c2_dev_base);
}

TEST_CASE("on a time-invariant plant both normalization modes score alike") {
  // steady analytic V vs pooled constant V: the per-step ensemble-mean
  // metrics should be statistically indistinguishable (CoV ratio near 1).
  ScalarScenarioParams sp;
  sp.horizon = 3000;
  const Scenario s = build_scalar_scenario(sp);
  const int N = sp.horizon;
  std::vector<DetectionTrace> traces;
  for (int j = 0; j < 40; ++j) {
    traces.push_back(simulate(s.sys, s.noise, s.gains, nullptr, N, derive_seed(5050, j)));
  }
  const NormalizationSchedule ltv = analytic_normalization(s.sys, s.gains, s.noise, N);
  const std::vector<MatrixXd> lti(N, lti_baseline_normalization(traces));

  std::vector<double> mean_ltv(N, 0.0), mean_lti(N, 0.0);
  std::vector<long> counts(N, 0);
  for (const auto& trace : traces) {
    const MetricSeries a = score_trace(trace, ltv.V, s.detector);
    const MetricSeries b = score_trace(trace, lti, s.detector);
    for (int n = 0; n < N; ++n) {
      if (std::isnan(a.metric[n]) || std::isnan(b.metric[n])) continue;
      mean_ltv[n] += a.metric[n];
      mean_lti[n] += b.metric[n];
      ++counts[n];
    }
  }
  auto cov = [&](const std::vector<double>& m) {
    double sum = 0;
    long cnt = 0;
    for (int n = 200; n < N; ++n) {  // skip the analytic-V transient
      if (counts[n]) { sum += m[n] / counts[n]; ++cnt; }
    }
    const double mean = sum / cnt;
    double ss = 0;
    for (int n = 200; n < N; ++n) {
      if (counts[n]) {
        const double d = m[n] / counts[n] - mean;
        ss += d * d;
      }
    }
    return std::sqrt(ss / (cnt - 1)) / std::abs(mean);
  };
  const double ratio = cov(mean_ltv) / cov(mean_lti);
  CHECK(ratio > 0.8);
  CHECK(ratio < 1.25);
}

TEST_CASE("normalization identity holds along the car horizon") {
  CarScenarioParams params = CarScenarioParams::defaults();
  params.traj.duration_s = 10.0;
  const Scenario car = build_car_scenario(params);
  const NormalizationSchedule norm =
      analytic_normalization(car.sys, car.gains, car.noise, car.horizon());
  double worst = 0.0;
  for (int n = 0; n < car.horizon(); ++n) {
    const MatrixXd m = car.sys.C[n] * norm.Sigma_delta[n] * car.sys.C[n].transpose() +
                       car.noise.Sigma_z[n];
    worst = std::max(worst, (norm.V[n] * m * norm.V[n].transpose() -
                             MatrixXd::Identity(5, 5))
                                .cwiseAbs()
                                .maxCoeff());
  }
  CHECK(worst < 1e-9);
}

}  // TEST_SUITE
