#include "ltvdw/synthesis.hpp"

#include <Eigen/LU>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include "ltvdw/detector.hpp"
#include "ltvdw/linalg.hpp"

namespace ltvdw {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double ReferenceTrajectory::mean_speed() const {
  double sum = 0.0;
  for (const auto& s : samples) sum += s.v;
  return samples.empty() ? 0.0 : sum / static_cast<double>(samples.size());
}

void ReferenceTrajectory::validate(double velocity_floor) const {
  if (samples.empty()) throw std::invalid_argument("reference trajectory is empty");
  if (dt <= 0.0) throw std::invalid_argument("reference trajectory dt must be positive");
  for (size_t i = 0; i < samples.size(); ++i) {
    if (std::abs(samples[i].v) <= velocity_floor) {
      throw std::invalid_argument("trajectory speed " + std::to_string(samples[i].v) +
                                  " at sample " + std::to_string(i) +
                                  " is below the velocity floor " +
                                  std::to_string(velocity_floor));
    }
  }
}

ReferenceTrajectory generate_trajectory(const TrajectoryParams& p) {
  if (p.dt <= 0.0) throw std::invalid_argument("trajectory dt must be positive");
  const int count = static_cast<int>(std::llround(p.duration_s / p.dt)) + 1;
  const double two_pi = 2.0 * std::numbers::pi;
  const double wv = two_pi / p.v_period_s;
  const double wh = two_pi / p.heading_period_s;

  ReferenceTrajectory traj;
  traj.dt = p.dt;
  traj.samples.resize(count);
  double px = 0.0, py = 0.0;
  for (int n = 0; n < count; ++n) {
    const double t = n * p.dt;
    auto& s = traj.samples[n];
    s.v = p.v_mean + p.v_amp * std::sin(wv * t);
    s.a = p.v_amp * wv * std::cos(wv * t);
    s.psi = p.heading_amp * std::sin(wh * t);
    s.psi_dot = p.heading_amp * wh * std::cos(wh * t);
    s.psi_ddot = -p.heading_amp * wh * wh * std::sin(wh * t);
    s.x = px;
    s.y = py;
    px += p.dt * s.v * std::cos(s.psi);
    py += p.dt * s.v * std::sin(s.psi);
  }
  traj.validate(p.velocity_floor);
  return traj;
}

ContinuousSchedule linearize_unicycle(const ReferenceTrajectory& traj) {
  if (traj.samples.empty()) throw std::invalid_argument("trajectory is empty");
  ContinuousSchedule out;
  out.A_c.reserve(traj.samples.size());
  out.B_c.reserve(traj.samples.size());
  for (const auto& s : traj.samples) {
    MatrixXd A = MatrixXd::Zero(5, 5);
    A(0, 2) = -s.v * std::sin(s.psi);
    A(0, 3) = std::cos(s.psi);
    A(1, 2) = s.v * std::cos(s.psi);
    A(1, 3) = std::sin(s.psi);
    A(2, 4) = 1.0;
    MatrixXd B = MatrixXd::Zero(5, 2);
    B(3, 0) = 1.0;  // dv/dt = a
    B(4, 1) = 1.0;  // d(psi_dot)/dt = psi_ddot
    out.A_c.push_back(std::move(A));
    out.B_c.push_back(std::move(B));
  }
  return out;
}

std::pair<MatrixXd, MatrixXd> discretize_zoh(const MatrixXd& A_c, const MatrixXd& B_c,
                                             double dt) {
  if (dt <= 0.0) throw std::invalid_argument("discretize_zoh: dt must be positive");
  const int p = static_cast<int>(A_c.rows());
  const int q = static_cast<int>(B_c.cols());
  if (A_c.cols() != p || B_c.rows() != p) {
    throw std::invalid_argument("discretize_zoh: dimension mismatch");
  }
  MatrixXd aug = MatrixXd::Zero(p + q, p + q);
  aug.topLeftCorner(p, p) = A_c;
  aug.topRightCorner(p, q) = B_c;
  const MatrixXd e = (aug * dt).exp();
  if (!e.allFinite()) {
    throw std::runtime_error("discretize_zoh: matrix exponential did not converge");
  }
  return {e.topLeftCorner(p, p), e.topRightCorner(p, q)};
}

LqrResult lqr_gains(const std::vector<MatrixXd>& A, const std::vector<MatrixXd>& B,
                    const MatrixXd& Q, const MatrixXd& R, const MatrixXd& P_terminal) {
  const int N = static_cast<int>(A.size());
  if (static_cast<int>(B.size()) != N) {
    throw std::invalid_argument("lqr_gains: A and B sequences differ in length");
  }
  LqrResult out;
  out.K.resize(N);
  out.P.resize(N + 1);
  out.P[N] = P_terminal;
  for (int n = N - 1; n >= 0; --n) {
    const MatrixXd& An = A[n];
    const MatrixXd& Bn = B[n];
    const MatrixXd G = R + Bn.transpose() * out.P[n + 1] * Bn;
    Eigen::FullPivLU<MatrixXd> lu(G);
    if (!lu.isInvertible()) {
      throw std::runtime_error("lqr_gains: R + B^T P B singular at step " +
                               std::to_string(n));
    }
    out.K[n] = -lu.solve(Bn.transpose() * out.P[n + 1] * An);
    MatrixXd P = Q + An.transpose() * out.P[n + 1] * (An + Bn * out.K[n]);
    out.P[n] = 0.5 * (P + P.transpose());  // enforce symmetry against round-off
  }
  return out;
}

MatrixXd dare_fixed_point(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                          const MatrixXd& R, double tol, int max_iters) {
  MatrixXd P = Q;
  for (int it = 0; it < max_iters; ++it) {
    const MatrixXd G = R + B.transpose() * P * B;
    Eigen::FullPivLU<MatrixXd> lu(G);
    if (!lu.isInvertible()) throw std::runtime_error("dare_fixed_point: singular R + B^T P B");
    const MatrixXd K = -lu.solve(B.transpose() * P * A);
    MatrixXd Pn = Q + A.transpose() * P * (A + B * K);
    Pn = 0.5 * (Pn + Pn.transpose());
    const double diff = (Pn - P).cwiseAbs().maxCoeff();
    P = Pn;
    if (diff <= tol * std::max(1.0, P.cwiseAbs().maxCoeff())) return P;
    if (!P.allFinite() || P.cwiseAbs().maxCoeff() > 1e14) {
      throw std::runtime_error("dare_fixed_point: recursion diverged");
    }
  }
  throw std::runtime_error("dare_fixed_point: no convergence within iteration cap");
}

MatrixXd filter_dare_fixed_point(const MatrixXd& A, const MatrixXd& C,
                                 const MatrixXd& Sigma_w, const MatrixXd& Sigma_z,
                                 double tol, int max_iters) {
  MatrixXd P = Sigma_w;
  for (int it = 0; it < max_iters; ++it) {
    const MatrixXd G = C * P * C.transpose() + Sigma_z;
    Eigen::FullPivLU<MatrixXd> lu(G);
    if (!lu.isInvertible()) {
      throw std::runtime_error("filter_dare_fixed_point: singular innovation covariance");
    }
    const MatrixXd L = -(A * P * C.transpose()) * lu.inverse();
    MatrixXd Pn = (A + L * C) * P * A.transpose() + Sigma_w;
    Pn = 0.5 * (Pn + Pn.transpose());
    const double diff = (Pn - P).cwiseAbs().maxCoeff();
    P = Pn;
    if (diff <= tol * std::max(1.0, P.cwiseAbs().maxCoeff())) return P;
    if (!P.allFinite() || P.cwiseAbs().maxCoeff() > 1e14) {
      throw std::runtime_error("filter_dare_fixed_point: recursion diverged");
    }
  }
  throw std::runtime_error("filter_dare_fixed_point: no convergence within iteration cap");
}

ObserverResult observer_gains(const StateSpaceSchedule& sys, const NoiseSchedule& noise,
                              std::optional<MatrixXd> P0) {
  sys.validate();
  noise.validate(sys);
  const int N = sys.horizon;
  ObserverResult out;
  out.L.resize(N);
  out.P.resize(N + 1);
  out.P[0] = P0 ? *P0
                : filter_dare_fixed_point(sys.A[0], sys.C[0], noise.Sigma_w[0],
                                          noise.Sigma_z[0]);
  for (int n = 0; n < N; ++n) {
    const MatrixXd G = sys.C[n] * out.P[n] * sys.C[n].transpose() + noise.Sigma_z[n];
    Eigen::FullPivLU<MatrixXd> lu(G);
    if (!lu.isInvertible()) {
      throw std::runtime_error("observer_gains: singular innovation covariance at step " +
                               std::to_string(n));
    }
    out.L[n] = -(sys.A[n] * out.P[n] * sys.C[n].transpose()) * lu.inverse();
    MatrixXd P = (sys.A[n] + out.L[n] * sys.C[n]) * out.P[n] * sys.A[n].transpose() +
                 noise.Sigma_w[n];
    out.P[n + 1] = 0.5 * (P + P.transpose());
  }
  return out;
}

std::string AssumptionReport::summary() const {
  std::ostringstream os;
  os << "pass = " << (pass ? "true" : "false") << "\n"
     << "eta_A_bar = " << eta_A_bar << " (step " << argmax_A_bar << ")\n"
     << "eta_A_under = " << eta_A_under << " (step " << argmax_A_under << ")\n"
     << "eta_B = " << eta_B << "\n"
     << "eta_C = " << eta_C << "\n"
     << "eta_L = " << eta_L << "\n"
     << "eta_w = " << eta_w << "\n"
     << "eta_z = " << eta_z << "\n"
     << "eta_delta = " << eta_delta << "\n"
     << "eta_V = " << eta_V << "\n"
     << "watermark_corr_max_abs = "
     << (watermark_corr_avg.size() ? watermark_corr_avg.cwiseAbs().maxCoeff() : 0.0)
     << " (tolerance " << corr_tolerance << ")\n";
  return os.str();
}

AssumptionReport verify_assumptions(const StateSpaceSchedule& sys,
                                    const GainSchedule& gains, const NoiseSchedule& noise,
                                    const NormalizationSchedule& normalization,
                                    double corr_tolerance) {
  sys.validate();
  gains.validate(sys);
  noise.validate(sys);
  const int N = sys.horizon;
  if (static_cast<int>(normalization.V.size()) < N ||
      static_cast<int>(normalization.Sigma_delta.size()) < N) {
    throw std::invalid_argument("verify_assumptions: normalization shorter than horizon");
  }

  AssumptionReport rep;
  rep.corr_tolerance = corr_tolerance;
  rep.watermark_corr_avg = MatrixXd::Zero(sys.r(), sys.q());
  for (int n = 0; n < N; ++n) {
    const double a_bar = spectral_norm(sys.A[n] + sys.B[n] * gains.K[n]);
    if (a_bar > rep.eta_A_bar) { rep.eta_A_bar = a_bar; rep.argmax_A_bar = n; }
    const double a_under = spectral_norm(sys.A[n] + gains.L[n] * sys.C[n]);
    if (a_under > rep.eta_A_under) { rep.eta_A_under = a_under; rep.argmax_A_under = n; }
    rep.eta_B = std::max(rep.eta_B, spectral_norm(sys.B[n]));
    rep.eta_C = std::max(rep.eta_C, spectral_norm(sys.C[n]));
    rep.eta_L = std::max(rep.eta_L, spectral_norm(gains.L[n]));
    rep.eta_w = std::max(rep.eta_w, spectral_norm(noise.Sigma_w[n]));
    rep.eta_z = std::max(rep.eta_z, spectral_norm(noise.Sigma_z[n]));
    rep.eta_delta = std::max(rep.eta_delta, spectral_norm(normalization.Sigma_delta[n]));
    rep.eta_V = std::max(rep.eta_V, spectral_norm(normalization.V[n]));
    if (n >= 1) rep.watermark_corr_avg += sys.C[n] * sys.B[n - 1];
  }
  if (N > 1) rep.watermark_corr_avg /= static_cast<double>(N - 1);

  const bool finite = std::isfinite(rep.eta_B) && std::isfinite(rep.eta_C) &&
                      std::isfinite(rep.eta_L) && std::isfinite(rep.eta_w) &&
                      std::isfinite(rep.eta_z) && std::isfinite(rep.eta_delta) &&
                      std::isfinite(rep.eta_V);
  const bool corr_ok = rep.watermark_corr_avg.size() > 0 &&
                       rep.watermark_corr_avg.cwiseAbs().maxCoeff() > corr_tolerance;
  rep.pass = rep.eta_A_bar < 1.0 && rep.eta_A_under < 1.0 && finite && corr_ok;
  return rep;
}

std::optional<int> compute_kprime(const MatrixXd& A, const MatrixXd& B, const MatrixXd& C,
                                  const MatrixXd& K, int max_k, double tol) {
  const MatrixXd A_bar = A + B * K;
  MatrixXd power = MatrixXd::Identity(A.rows(), A.cols());
  for (int k = 0; k <= max_k; ++k) {
    if (spectral_norm(C * power * B) > tol) return k;
    power = A_bar * power;
  }
  return std::nullopt;
}

BalancedRealization balance_realization(const StateSpaceSchedule& sys,
                                        const NoiseSchedule& noise,
                                        const GainSchedule& gains, double eps) {
  sys.validate();
  noise.validate(sys);
  gains.validate(sys);
  const int N = sys.horizon;
  const int p = sys.p();
  const MatrixXd I = MatrixXd::Identity(p, p);

  std::vector<MatrixXd> A_bar(N);
  for (int n = 0; n < N; ++n) A_bar[n] = sys.A[n] + sys.B[n] * gains.K[n];

  // Terminal certificate: fixed point of P = Abar^T P Abar + eps I with the
  // final-step matrices frozen.
  MatrixXd P = eps * I;
  for (int it = 0; it < 200000; ++it) {
    MatrixXd Pn = A_bar[N - 1].transpose() * P * A_bar[N - 1] + eps * I;
    Pn = 0.5 * (Pn + Pn.transpose());
    const double diff = (Pn - P).cwiseAbs().maxCoeff();
    P = Pn;
    if (!P.allFinite() || P.cwiseAbs().maxCoeff() > 1e14) {
      throw std::runtime_error("balance_realization: closed loop is not uniformly stable");
    }
    if (diff <= 1e-13 * std::max(1.0, P.cwiseAbs().maxCoeff())) break;
  }

  std::vector<MatrixXd> Ps(N + 1);
  Ps[N] = P;
  for (int n = N - 1; n >= 0; --n) {
    MatrixXd Pn = A_bar[n].transpose() * Ps[n + 1] * A_bar[n] + eps * I;
    Ps[n] = 0.5 * (Pn + Pn.transpose());
    if (Ps[n].cwiseAbs().maxCoeff() > 1e14) {
      throw std::runtime_error("balance_realization: backward recursion diverged");
    }
  }

  BalancedRealization out;
  out.U.resize(N + 1);
  out.U_inv.resize(N + 1);
  for (int n = 0; n <= N; ++n) {
    out.U[n] = symmetric_sqrt_spd(Ps[n], "balance certificate");
    out.U_inv[n] = inverse_sqrt_spd(Ps[n], "balance certificate");
  }

  out.sys.horizon = N;
  out.sys.dt = sys.dt;
  out.sys.A.resize(N);
  out.sys.B.resize(N);
  out.sys.C.resize(N);
  out.gains.K.resize(N);
  out.gains.L.resize(N);
  out.noise.Sigma_w.resize(N);
  out.noise.Sigma_z = {noise.Sigma_z.begin(), noise.Sigma_z.begin() + N};
  out.noise.Sigma_e = noise.Sigma_e;
  for (int n = 0; n < N; ++n) {
    out.sys.A[n] = out.U[n + 1] * sys.A[n] * out.U_inv[n];
    out.sys.B[n] = out.U[n + 1] * sys.B[n];
    out.sys.C[n] = sys.C[n] * out.U_inv[n];
    out.gains.K[n] = gains.K[n] * out.U_inv[n];
    out.gains.L[n] = out.U[n + 1] * gains.L[n];
    MatrixXd Sw = out.U[n + 1] * noise.Sigma_w[n] * out.U[n + 1].transpose();
    out.noise.Sigma_w[n] = 0.5 * (Sw + Sw.transpose());
  }
  return out;
}

}  // namespace ltvdw
