#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ltvdw/system.hpp"

namespace ltvdw {

// ---------------------------------------------------------------------------
// Plant construction and gain synthesis for the car experiment: linearize the
// unicycle-with-acceleration model along a reference trajectory, discretize
// with zero-order hold, synthesize LQR / Kalman gains, and check the norm
// assumptions the detector relies on.
// ---------------------------------------------------------------------------

/// Reference trajectory samples. State order (x, y, psi, v, psi_dot);
/// input order (a, psi_ddot).
struct ReferenceTrajectory {
  struct Sample {
    double x = 0, y = 0;
    double psi = 0;       // heading, rad
    double v = 0;         // forward speed, m/s
    double psi_dot = 0;   // rad/s
    double a = 0;         // m/s^2
    double psi_ddot = 0;  // rad/s^2
  };
  double dt = 0.0;
  std::vector<Sample> samples;

  double mean_speed() const;
  /// Throws if empty or if |v| drops to/below the floor at any sample
  /// (heading observability degrades as v -> 0).
  void validate(double velocity_floor) const;
};

/// Smooth default path: sinusoidal speed profile v(t) = v_mean +
/// v_amp sin(2 pi t / v_period) and a lane-change-like heading weave
/// psi(t) = heading_amp sin(2 pi t / heading_period). Positions come from
/// integrating the model; derivatives are analytic.
struct TrajectoryParams {
  double dt = 0.05;
  double duration_s = 50.0;
  double v_mean = 10.0;
  double v_amp = 5.0;
  double v_period_s = 25.0;
  double heading_amp = 0.35;
  double heading_period_s = 12.5;
  double velocity_floor = 0.5;
};

ReferenceTrajectory generate_trajectory(const TrajectoryParams& params);

/// Continuous-time Jacobians of the car model
///   d/dt (x, y, psi, v, psi_dot) = (v cos psi, v sin psi, psi_dot, a, psi_ddot)
/// at each trajectory sample. A_c is 5x5, B_c is 5x2.
struct ContinuousSchedule {
  std::vector<Eigen::MatrixXd> A_c;
  std::vector<Eigen::MatrixXd> B_c;
};
ContinuousSchedule linearize_unicycle(const ReferenceTrajectory& traj);

/// Exact zero-order-hold discretization via the augmented matrix exponential
/// exp(dt [[A_c, B_c], [0, 0]]): returns (A, B).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_zoh(const Eigen::MatrixXd& A_c,
                                                           const Eigen::MatrixXd& B_c,
                                                           double dt);

/// Backward Riccati recursion for u = K xhat:
///   K_n = -(R + B^T P_{n+1} B)^-1 B^T P_{n+1} A
///   P_n = Q + A^T P_{n+1} A + A^T P_{n+1} B K_n
/// Returns gains K_0..K_{N-1} and cost matrices P_0..P_N.
struct LqrResult {
  std::vector<Eigen::MatrixXd> K;
  std::vector<Eigen::MatrixXd> P;
};
LqrResult lqr_gains(const std::vector<Eigen::MatrixXd>& A,
                    const std::vector<Eigen::MatrixXd>& B, const Eigen::MatrixXd& Q,
                    const Eigen::MatrixXd& R, const Eigen::MatrixXd& P_terminal);

/// Fixed point of the backward LQR recursion for constant (A, B); used to
/// seed finite-horizon synthesis with the stationary terminal cost.
Eigen::MatrixXd dare_fixed_point(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                 double tol = 1e-12, int max_iters = 200000);

/// Forward Riccati (Kalman) recursion with the sign convention of the
/// observer update (-L y):  L_n = -(A P C^T)(C P C^T + Sigma_z)^-1,
/// P_{n+1} = (A + L C) P A^T + Sigma_w. P0 defaults to the stationary
/// covariance of the frozen n=0 coefficients so L_n is uniformly
/// stabilizing from the first step.
struct ObserverResult {
  std::vector<Eigen::MatrixXd> L;
  std::vector<Eigen::MatrixXd> P;
};
ObserverResult observer_gains(const StateSpaceSchedule& sys, const NoiseSchedule& noise,
                              std::optional<Eigen::MatrixXd> P0 = std::nullopt);

/// Fixed point of the forward observer recursion for constant coefficients.
Eigen::MatrixXd filter_dare_fixed_point(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                        const Eigen::MatrixXd& Sigma_w,
                                        const Eigen::MatrixXd& Sigma_z,
                                        double tol = 1e-12, int max_iters = 200000);

/// Norm bounds of the synthesized loop plus the finite-horizon watermark
/// reachability average (1/N) sum_n C_n B_{n-1}.
struct AssumptionReport {
  double eta_A_bar = 0, eta_A_under = 0;
  double eta_B = 0, eta_C = 0, eta_L = 0;
  double eta_w = 0, eta_z = 0;
  double eta_delta = 0, eta_V = 0;
  int argmax_A_bar = -1, argmax_A_under = -1;
  Eigen::MatrixXd watermark_corr_avg;  // r x q
  double corr_tolerance = 1e-6;
  bool pass = false;

  std::string summary() const;
};

struct NormalizationSchedule;  // detector module

AssumptionReport verify_assumptions(const StateSpaceSchedule& sys,
                                    const GainSchedule& gains,
                                    const NoiseSchedule& noise,
                                    const NormalizationSchedule& normalization,
                                    double corr_tolerance = 1e-6);

/// Smallest k <= max_k with ||C (A+BK)^k B|| above tol, for LTI matrices;
/// std::nullopt when the watermark never reaches the measurement.
std::optional<int> compute_kprime(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& C, const Eigen::MatrixXd& K,
                                  int max_k, double tol = 1e-10);

/// Re-expresses a synthesized loop in time-varying Lyapunov-balanced state
/// coordinates x' = U_n x, U_n = P_n^{1/2} from the backward recursion
/// P_n = Abar_n^T P_{n+1} Abar_n + eps I seeded with the frozen fixed point
/// at the final step. In the balanced realization the one-step closed-loop
/// contraction max_n ||Abar'_n|| < 1 holds whenever the family is uniformly
/// exponentially stable; measurements stay in their original space
/// (C'_n = C_n U_n^{-1}, Sigma_z untouched).
struct BalancedRealization {
  StateSpaceSchedule sys;
  NoiseSchedule noise;
  GainSchedule gains;
  std::vector<Eigen::MatrixXd> U;      // state maps U_0..U_N
  std::vector<Eigen::MatrixXd> U_inv;
};
BalancedRealization balance_realization(const StateSpaceSchedule& sys,
                                        const NoiseSchedule& noise,
                                        const GainSchedule& gains, double eps = 1.0);

}  // namespace ltvdw
