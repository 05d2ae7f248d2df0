#include "ltvdw/system.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ltvdw/linalg.hpp"

namespace ltvdw {

namespace {
void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

void StateSpaceSchedule::validate() const {
  require(dt > 0.0, "schedule dt must be positive");
  require(horizon >= 0, "schedule horizon must be non-negative");
  require(static_cast<int>(A.size()) >= horizon, "A sequence shorter than horizon");
  require(static_cast<int>(B.size()) >= horizon, "B sequence shorter than horizon");
  require(static_cast<int>(C.size()) >= horizon, "C sequence shorter than horizon");
  if (horizon == 0) return;
  const int np = p(), nq = q(), nr = r();
  for (int n = 0; n < horizon; ++n) {
    require(A[n].rows() == np && A[n].cols() == np,
            "A[" + std::to_string(n) + "] has inconsistent dimensions");
    require(B[n].rows() == np && B[n].cols() == nq,
            "B[" + std::to_string(n) + "] has inconsistent dimensions");
    require(C[n].rows() == nr && C[n].cols() == np,
            "C[" + std::to_string(n) + "] has inconsistent dimensions");
  }
}

void NoiseSchedule::validate(const StateSpaceSchedule& sys) const {
  require(static_cast<int>(Sigma_w.size()) >= sys.horizon,
          "Sigma_w sequence shorter than horizon");
  require(static_cast<int>(Sigma_z.size()) >= sys.horizon,
          "Sigma_z sequence shorter than horizon");
  require(Sigma_e.rows() == sys.q() && Sigma_e.cols() == sys.q(),
          "Sigma_e dimension mismatch");
  for (int n = 0; n < sys.horizon; ++n) {
    require(Sigma_w[n].rows() == sys.p() && Sigma_w[n].cols() == sys.p(),
            "Sigma_w[" + std::to_string(n) + "] dimension mismatch");
    require(Sigma_z[n].rows() == sys.r() && Sigma_z[n].cols() == sys.r(),
            "Sigma_z[" + std::to_string(n) + "] dimension mismatch");
  }
}

void GainSchedule::validate(const StateSpaceSchedule& sys) const {
  require(static_cast<int>(K.size()) >= sys.horizon, "K sequence shorter than horizon");
  require(static_cast<int>(L.size()) >= sys.horizon, "L sequence shorter than horizon");
  for (int n = 0; n < sys.horizon; ++n) {
    require(K[n].rows() == sys.q() && K[n].cols() == sys.p(),
            "K[" + std::to_string(n) + "] dimension mismatch");
    require(L[n].rows() == sys.p() && L[n].cols() == sys.r(),
            "L[" + std::to_string(n) + "] dimension mismatch");
  }
}

SimulationState SimulationState::zero(int p) {
  SimulationState s;
  s.n = 0;
  s.x = Eigen::VectorXd::Zero(p);
  s.x_hat = Eigen::VectorXd::Zero(p);
  s.delta_bar = Eigen::VectorXd::Zero(p);
  s.delta_hat = Eigen::VectorXd::Zero(p);
  return s;
}

std::pair<SimulationState, Eigen::VectorXd> step_with_noise(
    const StateSpaceSchedule& sys, const GainSchedule& gains,
    const SimulationState& state, const Eigen::VectorXd& e_n,
    const Eigen::VectorXd& v_n, const Eigen::VectorXd& w_n,
    const Eigen::VectorXd& z_n) {
  const int n = state.n;
  if (n >= sys.horizon) {
    throw std::invalid_argument("step index " + std::to_string(n) +
                                " beyond schedule horizon " + std::to_string(sys.horizon));
  }
  if (e_n.size() != sys.q() || v_n.size() != sys.r() || w_n.size() != sys.p() ||
      z_n.size() != sys.r() || state.x.size() != sys.p()) {
    throw std::invalid_argument("step input dimension mismatch at n=" + std::to_string(n));
  }

  const Eigen::MatrixXd& A = sys.A[n];
  const Eigen::MatrixXd& B = sys.B[n];
  const Eigen::MatrixXd& C = sys.C[n];
  const Eigen::MatrixXd& K = gains.K[n];
  const Eigen::MatrixXd& L = gains.L[n];

  const Eigen::VectorXd y = C * state.x + z_n + v_n;

  SimulationState next;
  next.n = n + 1;
  next.x = A * state.x + B * (K * state.x_hat) + B * e_n + w_n;
  // (Abar + L C) xhat + B e - L y, with Abar = A + B K
  next.x_hat = A * state.x_hat + B * (K * state.x_hat) + L * (C * state.x_hat) +
               B * e_n - L * y;
  const Eigen::MatrixXd A_under = A + L * C;
  next.delta_bar = A_under * state.delta_bar - w_n - L * z_n;
  next.delta_hat = A_under * state.delta_hat - L * v_n;
  return {std::move(next), y};
}

std::pair<SimulationState, Eigen::VectorXd> step(
    const StateSpaceSchedule& sys, const NoiseSchedule& noise,
    const GainSchedule& gains, const SimulationState& state,
    const Eigen::VectorXd& e_n, const Eigen::VectorXd& v_n, Rng& rng) {
  const int n = state.n;
  if (n >= sys.horizon) {
    throw std::invalid_argument("step index " + std::to_string(n) +
                                " beyond schedule horizon " + std::to_string(sys.horizon));
  }
  // Draw order (z then w) matches simulate().
  const Eigen::VectorXd z_n =
      draw_gaussian(noise.Sigma_z[n], rng, "Sigma_z[" + std::to_string(n) + "]");
  const Eigen::VectorXd w_n =
      draw_gaussian(noise.Sigma_w[n], rng, "Sigma_w[" + std::to_string(n) + "]");
  return step_with_noise(sys, gains, state, e_n, v_n, w_n, z_n);
}

DetectionTrace simulate(const StateSpaceSchedule& sys, const NoiseSchedule& noise,
                        const GainSchedule& gains, MeasurementAttack* attack,
                        int horizon, std::uint64_t seed) {
  if (horizon > sys.horizon) {
    throw std::invalid_argument("simulation horizon " + std::to_string(horizon) +
                                " exceeds schedule horizon " + std::to_string(sys.horizon));
  }
  sys.validate();
  noise.validate(sys);
  gains.validate(sys);

  DetectionTrace trace;
  trace.dt = sys.dt;
  if (horizon == 0) return trace;

  Rng rng(derive_seed(seed, 0));
  Rng attack_rng(derive_seed(seed, 1));

  GaussianSampler e_sampler(noise.Sigma_e, "Sigma_e");
  std::vector<GaussianSampler> z_samplers = make_samplers(
      {noise.Sigma_z.begin(), noise.Sigma_z.begin() + horizon}, "Sigma_z");
  std::vector<GaussianSampler> w_samplers = make_samplers(
      {noise.Sigma_w.begin(), noise.Sigma_w.begin() + horizon}, "Sigma_w");

  const int r = sys.r();
  trace.x.reserve(horizon);
  trace.y.reserve(horizon);

  SimulationState state = SimulationState::zero(sys.p());
  for (int n = 0; n < horizon; ++n) {
    const Eigen::VectorXd e_n = e_sampler.draw(rng);
    const Eigen::VectorXd z_n = z_samplers[n].draw(rng);
    const Eigen::VectorXd w_n = w_samplers[n].draw(rng);
    const Eigen::VectorXd v_n = attack ? attack->next(n, state.x, z_n, attack_rng)
                                       : Eigen::VectorXd::Zero(r);

    auto [next, y_n] = step_with_noise(sys, gains, state, e_n, v_n, w_n, z_n);

    trace.x.push_back(state.x);
    trace.x_hat.push_back(state.x_hat);
    trace.y.push_back(y_n);
    trace.e.push_back(e_n);
    trace.v.push_back(v_n);
    trace.z.push_back(z_n);
    trace.residual.push_back(sys.C[n] * state.x_hat - y_n);
    trace.delta_bar.push_back(state.delta_bar);
    trace.delta_hat.push_back(state.delta_hat);
    trace.metric.push_back(std::numeric_limits<double>::quiet_NaN());
    trace.alarm.push_back(0);

    state = std::move(next);
  }
  return trace;
}

}  // namespace ltvdw
