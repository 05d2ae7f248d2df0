#include "ltvdw/scenario.hpp"

#include <cmath>
#include <stdexcept>

#include "ltvdw/linalg.hpp"

namespace ltvdw {

using Eigen::MatrixXd;
using Eigen::VectorXd;

CarScenarioParams CarScenarioParams::defaults() {
  CarScenarioParams p;
  p.state_scale = (VectorXd(5) << 0.1, 0.1, 1.0, 1.0, 1.0).finished();
  p.q_diag = VectorXd::Ones(5);
  p.r_diag = VectorXd::Ones(2);
  p.sigma_w_base = (VectorXd(5) << 0.01, 0.01, 0.01, 0.01, 0.01).finished();
  p.sigma_z_base = (VectorXd(5) << 0.01, 0.01, 0.01, 0.01, 0.01).finished();
  p.sigma_e = (VectorXd(2) << 0.5, 0.5).finished();
  return p;
}

Scenario build_car_scenario(const CarScenarioParams& params) {
  if (params.state_scale.size() != 5 || params.q_diag.size() != 5 ||
      params.r_diag.size() != 2 || params.sigma_w_base.size() != 5 ||
      params.sigma_z_base.size() != 5 || params.sigma_e.size() != 2) {
    throw std::invalid_argument("car scenario parameter vectors have wrong sizes");
  }
  if (params.state_scale.minCoeff() <= 0.0) {
    throw std::invalid_argument("state_scale entries must be positive");
  }

  const ReferenceTrajectory traj = generate_trajectory(params.traj);
  const int N = static_cast<int>(traj.samples.size()) - 1;
  if (N < 1) throw std::invalid_argument("car scenario horizon too short");

  const ContinuousSchedule cont = linearize_unicycle(traj);

  // The model is expressed in normalized state coordinates
  // x_d = diag(state_scale) * (physical deviation state): the scaling keeps
  // position, heading and rate errors numerically comparable, which both the
  // LQR weights and the contraction certificate below rely on. Sensors
  // report the full normalized state (C = I before balancing).
  const MatrixXd T0 = params.state_scale.asDiagonal();
  const MatrixXd T0_inv = params.state_scale.cwiseInverse().asDiagonal();

  StateSpaceSchedule sys;
  sys.horizon = N;
  sys.dt = params.traj.dt;
  sys.A.resize(N);
  sys.B.resize(N);
  sys.C.assign(N, MatrixXd::Identity(5, 5));
  for (int n = 0; n < N; ++n) {
    auto [A_phys, B_phys] = discretize_zoh(cont.A_c[n], cont.B_c[n], sys.dt);
    sys.A[n] = T0 * A_phys * T0_inv;
    sys.B[n] = T0 * B_phys;
  }

  // Noise scales linearly with the reference speed, floored to keep full
  // rank. The base stds are given in the normalized coordinates.
  const double v_ref = traj.mean_speed();
  NoiseSchedule noise;
  noise.Sigma_w.resize(N);
  noise.Sigma_z.resize(N);
  noise.Sigma_e = params.sigma_e.cwiseAbs2().asDiagonal();
  const MatrixXd Sw_base = params.sigma_w_base.cwiseAbs2().asDiagonal();
  const MatrixXd Sz_base = params.sigma_z_base.cwiseAbs2().asDiagonal();
  for (int n = 0; n < N; ++n) {
    const double factor =
        std::max(params.velocity_noise_floor, traj.samples[n].v / v_ref);
    noise.Sigma_w[n] = factor * Sw_base;
    noise.Sigma_z[n] = factor * Sz_base;
  }

  const MatrixXd Q = params.q_diag.asDiagonal();
  const MatrixXd R = params.r_diag.asDiagonal();
  const MatrixXd P_terminal = dare_fixed_point(sys.A[N - 1], sys.B[N - 1], Q, R);
  const LqrResult lqr = lqr_gains(sys.A, sys.B, Q, R, P_terminal);

  GainSchedule gains;
  gains.K = lqr.K;

  // Kalman observer, seeded at the stationary covariance so the gain is
  // uniformly stabilizing from n = 0.
  const ObserverResult obs = observer_gains(sys, noise);
  gains.L = obs.L;

  // Balanced realization: contractive in one step, measurements unchanged.
  BalancedRealization balanced = balance_realization(sys, noise, gains);

  Scenario scenario;
  scenario.sys = std::move(balanced.sys);
  scenario.noise = std::move(balanced.noise);
  scenario.gains = std::move(balanced.gains);
  scenario.trajectory = traj;
  scenario.balance_maps = std::move(balanced.U);

  scenario.detector.window = params.window;
  scenario.detector.watermark_delay = params.watermark_delay;
  scenario.detector.S = make_scale_matrix(scenario.sys.r(), scenario.noise.Sigma_e);
  scenario.detector.validate(scenario.sys.q(), scenario.sys.r());

  const NormalizationSchedule norm =
      analytic_normalization(scenario.sys, scenario.gains, scenario.noise, N);
  scenario.report =
      verify_assumptions(scenario.sys, scenario.gains, scenario.noise, norm);
  return scenario;
}

Scenario build_scalar_scenario(const ScalarScenarioParams& params) {
  if (params.horizon < 1) throw std::invalid_argument("scalar scenario horizon too short");
  const auto m1 = [](double v) { return (MatrixXd(1, 1) << v).finished(); };

  StateSpaceSchedule sys;
  sys.horizon = params.horizon;
  sys.dt = 1.0;
  sys.A.assign(params.horizon, m1(params.a));
  sys.B.assign(params.horizon, m1(params.b));
  sys.C.assign(params.horizon, m1(params.c));

  NoiseSchedule noise;
  noise.Sigma_w.assign(params.horizon, m1(params.sigma_w * params.sigma_w));
  noise.Sigma_z.assign(params.horizon, m1(params.sigma_z * params.sigma_z));
  noise.Sigma_e = m1(params.sigma_e * params.sigma_e);

  GainSchedule gains;
  if (params.b != 0.0) {
    const MatrixXd P = dare_fixed_point(m1(params.a), m1(params.b), m1(params.lqr_q),
                                        m1(params.lqr_r));
    const double k = -(params.b * P(0, 0) * params.a) /
                     (params.lqr_r + params.b * P(0, 0) * params.b);
    gains.K.assign(params.horizon, m1(k));
  } else {
    gains.K.assign(params.horizon, m1(0.0));
  }
  const ObserverResult obs = observer_gains(sys, noise);
  gains.L = obs.L;

  Scenario scenario;
  scenario.sys = std::move(sys);
  scenario.noise = std::move(noise);
  scenario.gains = std::move(gains);
  scenario.detector.window = params.window;
  scenario.detector.watermark_delay = 1;
  scenario.detector.S = make_scale_matrix(1, scenario.noise.Sigma_e);
  scenario.detector.validate(1, 1);

  const NormalizationSchedule norm = analytic_normalization(
      scenario.sys, scenario.gains, scenario.noise, params.horizon);
  scenario.report =
      verify_assumptions(scenario.sys, scenario.gains, scenario.noise, norm);
  return scenario;
}

}  // namespace ltvdw
