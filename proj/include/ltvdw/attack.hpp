#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "ltvdw/system.hpp"

namespace ltvdw {

// ---------------------------------------------------------------------------
// Generalized replay attack on the measurement channel:
//
//   v_n      = alpha (C_n x_n + z_n) + C_n xi_n + zeta_n
//   xi_{n+1} = (A_n + B_n K_n) xi_n + omega_n
//
// with xi = 0 before the start step. alpha = -1 with covariances matching a
// legitimate watermarked loop is a pure replay.
// ---------------------------------------------------------------------------

struct AttackConfig {
  double alpha = 0.0;
  std::vector<Eigen::MatrixXd> Sigma_omega;  // p x p false-state process noise
  std::vector<Eigen::MatrixXd> Sigma_zeta;   // r x r false measurement noise
  int start_step = 0;

  void validate(const StateSpaceSchedule& sys) const;
};

struct FalseState {
  Eigen::VectorXd xi;  // zero before start_step
};

/// One attack step. For n < start_step returns v = 0 and leaves xi at zero;
/// otherwise draws zeta_n then omega_n from rng and applies the dynamics
/// above. Returns (v_n, xi_{n+1}).
std::pair<Eigen::VectorXd, Eigen::VectorXd> attack_signal(
    const AttackConfig& config, const StateSpaceSchedule& sys,
    const GainSchedule& gains, const Eigen::VectorXd& x_n,
    const Eigen::VectorXd& z_n, const Eigen::VectorXd& xi_n, Rng& rng, int n);

/// Pure replay preset: alpha = -1, Sigma_omega[n] = B_n Sigma_e B_n^T +
/// Sigma_w[n] (a replayed legitimate trajectory was itself watermarked, so
/// mimicking it includes the watermark channel), Sigma_zeta[n] = Sigma_z[n].
AttackConfig replay_preset(const StateSpaceSchedule& sys, const NoiseSchedule& noise,
                           const GainSchedule& gains, int start_step);

/// Average of v_n^T v_n over the trace, or over the trailing `window` steps.
double attack_power(const DetectionTrace& trace, std::optional<int> window = std::nullopt);

/// MeasurementAttack adapter for simulate().
class GeneralizedReplayAttack : public MeasurementAttack {
 public:
  GeneralizedReplayAttack(AttackConfig config, const StateSpaceSchedule& sys,
                          const GainSchedule& gains);

  Eigen::VectorXd next(int n, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                       Rng& attack_rng) override;

  const Eigen::VectorXd& xi() const { return xi_; }

 private:
  AttackConfig config_;
  const StateSpaceSchedule* sys_;
  const GainSchedule* gains_;
  Eigen::VectorXd xi_;
  std::vector<GaussianSampler> omega_samplers_;
  std::vector<GaussianSampler> zeta_samplers_;
};

}  // namespace ltvdw
