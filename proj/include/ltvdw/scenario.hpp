#pragma once

#include <Eigen/Dense>
#include <string>

#include "ltvdw/detector.hpp"
#include "ltvdw/synthesis.hpp"
#include "ltvdw/system.hpp"

namespace ltvdw {

/// Everything needed to run, calibrate and score one experiment.
struct Scenario {
  StateSpaceSchedule sys;
  NoiseSchedule noise;
  GainSchedule gains;
  DetectorConfig detector;          // threshold left at +inf until calibrated
  AssumptionReport report;
  ReferenceTrajectory trajectory;   // empty for non-car scenarios
  std::vector<Eigen::MatrixXd> balance_maps;  // U_n, car scenario only

  int horizon() const { return sys.horizon; }
  double dt() const { return sys.dt; }
};

/// Inputs of the car scenario builder (defaults reproduce the shipped
/// configs/car_default.cfg).
struct CarScenarioParams {
  TrajectoryParams traj;
  Eigen::VectorXd state_scale;    // LQR design prescale, diag, size 5
  Eigen::VectorXd q_diag;         // LQR state weights in design coords, size 5
  Eigen::VectorXd r_diag;         // LQR input weights, size 2
  Eigen::VectorXd sigma_w_base;   // process noise stds (physical), size 5
  Eigen::VectorXd sigma_z_base;   // measurement noise stds (physical), size 5
  Eigen::VectorXd sigma_e;        // watermark stds, size 2
  double velocity_noise_floor = 0.1;
  int window = 21;
  int watermark_delay = 1;
  double target_rate_per_s = 1.0 / 50.0;

  static CarScenarioParams defaults();
};

/// Builds the car scenario: trajectory -> unicycle linearization -> ZOH
/// discretization -> LQR + Kalman synthesis -> Lyapunov-balanced
/// realization -> assumption report. Noise covariances scale linearly with
/// the reference speed (relative to its mean) with a multiplicative floor
/// that preserves full rank.
Scenario build_car_scenario(const CarScenarioParams& params);

/// Scalar (p = q = r = 1) LTI loop with stationary LQR / Kalman gains;
/// the workhorse for validation and distribution-level tests.
struct ScalarScenarioParams {
  double a = 0.5, b = 1.0, c = 1.0;
  double sigma_w = 1.0, sigma_z = 1.0, sigma_e = 1.0;
  double lqr_q = 1.0, lqr_r = 1.0;
  int horizon = 1000;
  int window = 21;
};
Scenario build_scalar_scenario(const ScalarScenarioParams& params);

}  // namespace ltvdw
