#include "ltvdw/attack.hpp"

#include <stdexcept>

#include "ltvdw/linalg.hpp"

namespace ltvdw {

void AttackConfig::validate(const StateSpaceSchedule& sys) const {
  if (start_step < 0) throw std::invalid_argument("attack start_step must be >= 0");
  if (static_cast<int>(Sigma_omega.size()) < sys.horizon ||
      static_cast<int>(Sigma_zeta.size()) < sys.horizon) {
    throw std::invalid_argument("attack covariance sequences shorter than horizon");
  }
  for (int n = 0; n < sys.horizon; ++n) {
    if (Sigma_omega[n].rows() != sys.p() || Sigma_omega[n].cols() != sys.p())
      throw std::invalid_argument("Sigma_omega[" + std::to_string(n) + "] dimension mismatch");
    if (Sigma_zeta[n].rows() != sys.r() || Sigma_zeta[n].cols() != sys.r())
      throw std::invalid_argument("Sigma_zeta[" + std::to_string(n) + "] dimension mismatch");
  }
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> attack_signal(
    const AttackConfig& config, const StateSpaceSchedule& sys,
    const GainSchedule& gains, const Eigen::VectorXd& x_n,
    const Eigen::VectorXd& z_n, const Eigen::VectorXd& xi_n, Rng& rng, int n) {
  if (n < 0) throw std::invalid_argument("attack step index must be >= 0");
  if (x_n.size() != sys.p() || xi_n.size() != sys.p() || z_n.size() != sys.r()) {
    throw std::invalid_argument("attack_signal dimension mismatch at n=" + std::to_string(n));
  }
  if (n < config.start_step) {
    return {Eigen::VectorXd::Zero(sys.r()), xi_n};
  }
  const Eigen::VectorXd zeta =
      draw_gaussian(config.Sigma_zeta[n], rng, "Sigma_zeta[" + std::to_string(n) + "]");
  const Eigen::VectorXd omega =
      draw_gaussian(config.Sigma_omega[n], rng, "Sigma_omega[" + std::to_string(n) + "]");
  const Eigen::VectorXd v =
      config.alpha * (sys.C[n] * x_n + z_n) + sys.C[n] * xi_n + zeta;
  const Eigen::VectorXd xi_next =
      sys.A[n] * xi_n + sys.B[n] * (gains.K[n] * xi_n) + omega;
  return {v, xi_next};
}

AttackConfig replay_preset(const StateSpaceSchedule& sys, const NoiseSchedule& noise,
                           const GainSchedule& gains, int start_step) {
  (void)gains;
  AttackConfig config;
  config.alpha = -1.0;
  config.start_step = start_step;
  config.Sigma_omega.reserve(sys.horizon);
  config.Sigma_zeta.reserve(sys.horizon);
  for (int n = 0; n < sys.horizon; ++n) {
    config.Sigma_omega.push_back(sys.B[n] * noise.Sigma_e * sys.B[n].transpose() +
                                 noise.Sigma_w[n]);
    config.Sigma_zeta.push_back(noise.Sigma_z[n]);
  }
  return config;
}

double attack_power(const DetectionTrace& trace, std::optional<int> window) {
  const int total = trace.steps();
  if (total == 0) throw std::invalid_argument("attack_power: empty trace");
  int start = 0;
  if (window && *window > 0 && *window < total) start = total - *window;
  double sum = 0.0;
  for (int n = start; n < total; ++n) sum += trace.v[n].squaredNorm();
  return sum / static_cast<double>(total - start);
}

GeneralizedReplayAttack::GeneralizedReplayAttack(AttackConfig config,
                                                 const StateSpaceSchedule& sys,
                                                 const GainSchedule& gains)
    : config_(std::move(config)), sys_(&sys), gains_(&gains),
      xi_(Eigen::VectorXd::Zero(sys.p())) {
  config_.validate(sys);
  // Factor only the active steps; pre-attack steps draw nothing.
  omega_samplers_.resize(sys.horizon);
  zeta_samplers_.resize(sys.horizon);
  for (int n = config_.start_step; n < sys.horizon; ++n) {
    omega_samplers_[n] =
        GaussianSampler(config_.Sigma_omega[n], "Sigma_omega[" + std::to_string(n) + "]");
    zeta_samplers_[n] =
        GaussianSampler(config_.Sigma_zeta[n], "Sigma_zeta[" + std::to_string(n) + "]");
  }
}

Eigen::VectorXd GeneralizedReplayAttack::next(int n, const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& z, Rng& attack_rng) {
  if (n < config_.start_step) return Eigen::VectorXd::Zero(sys_->r());
  const Eigen::VectorXd zeta = zeta_samplers_[n].draw(attack_rng);
  const Eigen::VectorXd omega = omega_samplers_[n].draw(attack_rng);
  const Eigen::VectorXd v =
      config_.alpha * (sys_->C[n] * x + z) + sys_->C[n] * xi_ + zeta;
  xi_ = sys_->A[n] * xi_ + sys_->B[n] * (gains_->K[n] * xi_) + omega;
  return v;
}

}  // namespace ltvdw
