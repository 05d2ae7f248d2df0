#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "ltvdw/gaussian.hpp"
#include "ltvdw/rng.hpp"

namespace ltvdw {

// ---------------------------------------------------------------------------
// Closed-loop LTV plant with watermarked input:
//
//   x_{n+1}    = A_n x_n + B_n K_n xhat_n + B_n e_n + w_n
//   y_n        = C_n x_n + z_n + v_n
//   xhat_{n+1} = (A_n + B_n K_n + L_n C_n) xhat_n + B_n e_n - L_n y_n
//
// with observer error delta = xhat - x split into a nominal part driven by
// (w, z) and an attack part driven only by v:
//
//   dbar_{n+1} = (A_n + L_n C_n) dbar_n - w_n - L_n z_n
//   dhat_{n+1} = (A_n + L_n C_n) dhat_n - L_n v_n
// ---------------------------------------------------------------------------

/// Time-indexed plant matrices. Stored as explicit per-step sequences so
/// traces are replayable and serializable.
struct StateSpaceSchedule {
  int horizon = 0;   // simulation steps the schedule must cover
  double dt = 0.0;   // seconds per step
  std::vector<Eigen::MatrixXd> A;  // p x p
  std::vector<Eigen::MatrixXd> B;  // p x q
  std::vector<Eigen::MatrixXd> C;  // r x p

  int p() const { return A.empty() ? 0 : static_cast<int>(A[0].rows()); }
  int q() const { return B.empty() ? 0 : static_cast<int>(B[0].cols()); }
  int r() const { return C.empty() ? 0 : static_cast<int>(C[0].rows()); }

  /// Throws std::invalid_argument on inconsistent dimensions, sequences
  /// shorter than the horizon, or dt <= 0.
  void validate() const;
};

struct NoiseSchedule {
  std::vector<Eigen::MatrixXd> Sigma_w;  // p x p process noise covariances
  std::vector<Eigen::MatrixXd> Sigma_z;  // r x r measurement noise covariances
  Eigen::MatrixXd Sigma_e;               // q x q watermark covariance

  void validate(const StateSpaceSchedule& sys) const;
};

struct GainSchedule {
  std::vector<Eigen::MatrixXd> K;  // q x p controller gains, u = K xhat
  std::vector<Eigen::MatrixXd> L;  // p x r observer gains (enters as -L y)

  void validate(const StateSpaceSchedule& sys) const;
};

struct SimulationState {
  int n = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd x_hat;
  Eigen::VectorXd delta_bar;
  Eigen::VectorXd delta_hat;

  static SimulationState zero(int p);
};

/// Attack interface used by simulate(). Implemented by the attack module;
/// kept abstract here so the core simulator has no attack dependency.
class MeasurementAttack {
 public:
  virtual ~MeasurementAttack() = default;
  /// Attack value v_n given the true state and the realized measurement
  /// noise of step n. Must also advance any internal attacker state.
  virtual Eigen::VectorXd next(int n, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& z, Rng& attack_rng) = 0;
};

/// Per-step record of a simulated closed loop.
struct DetectionTrace {
  double dt = 0.0;
  std::vector<Eigen::VectorXd> x, x_hat, y, e, v, z, residual;  // residual = C xhat - y
  std::vector<Eigen::VectorXd> delta_bar, delta_hat;
  std::vector<double> metric;   // NaN until the detector window is full
  std::vector<uint8_t> alarm;

  int steps() const { return static_cast<int>(y.size()); }
};

/// Advances one step. e_n and v_n are supplied by the caller (v_n zero when
/// unattacked); z_n then w_n are drawn from rng in that order. Returns the
/// measurement y_n taken before the state advances.
std::pair<SimulationState, Eigen::VectorXd> step(
    const StateSpaceSchedule& sys, const NoiseSchedule& noise,
    const GainSchedule& gains, const SimulationState& state,
    const Eigen::VectorXd& e_n, const Eigen::VectorXd& v_n, Rng& rng);

/// Deterministic core of step(): all random inputs supplied.
std::pair<SimulationState, Eigen::VectorXd> step_with_noise(
    const StateSpaceSchedule& sys, const GainSchedule& gains,
    const SimulationState& state, const Eigen::VectorXd& e_n,
    const Eigen::VectorXd& v_n, const Eigen::VectorXd& w_n,
    const Eigen::VectorXd& z_n);

/// Full closed-loop run. Per step the trace RNG (stream 0 of `seed`) draws
/// e_n, z_n, w_n in that order; attack randomness uses stream 1 so the
/// nominal noise realization matches the unattacked run with the same seed.
/// Bit-reproducible given (inputs, seed); see the RNG notes in rng.hpp.
DetectionTrace simulate(const StateSpaceSchedule& sys, const NoiseSchedule& noise,
                        const GainSchedule& gains, MeasurementAttack* attack,
                        int horizon, std::uint64_t seed);

}  // namespace ltvdw
