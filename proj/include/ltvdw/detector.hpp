#pragma once

#include <Eigen/Dense>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ltvdw/system.hpp"

namespace ltvdw {

// ---------------------------------------------------------------------------
// Watermark test machinery: the time-varying residual whitener V_n, the
// stacked vector psi_n = [V_n (C_n xhat_n - y_n); e_{n-1}], the sliding
// outer-product sum Q_n over a window of l+1 samples, and the Wishart
// negative log likelihood metric
//
//   L(Q_n) = (q + r - l) log|Q_n| + tr(S^-1 Q_n),   S = blkdiag(I_r, Sigma_e).
// ---------------------------------------------------------------------------

/// Observer-error covariances and the residual whiteners derived from them.
/// Invariant: V_n (C_n Sigma_delta_n C_n^T + Sigma_z_n) V_n^T = I_r.
struct NormalizationSchedule {
  std::vector<Eigen::MatrixXd> Sigma_delta;  // p x p, may be empty for ensemble/LTI modes
  std::vector<Eigen::MatrixXd> V;            // r x r, symmetric positive definite
};

/// Sigma_delta recursion with Sigma_delta_0 = 0:
///   Sigma_{n+1} = (A_n + L_n C_n) Sigma_n (A_n + L_n C_n)^T
///                 + Sigma_w_n + L_n Sigma_z_n L_n^T
std::vector<Eigen::MatrixXd> propagate_error_covariance(const StateSpaceSchedule& sys,
                                                        const GainSchedule& gains,
                                                        const NoiseSchedule& noise,
                                                        int horizon);

/// Principal inverse square root of C Sigma_delta C^T + Sigma_z.
Eigen::MatrixXd normalization_factor(const Eigen::MatrixXd& Sigma_delta,
                                     const Eigen::MatrixXd& C,
                                     const Eigen::MatrixXd& Sigma_z);

/// Analytic normalization over a horizon.
NormalizationSchedule analytic_normalization(const StateSpaceSchedule& sys,
                                             const GainSchedule& gains,
                                             const NoiseSchedule& noise, int horizon);

/// Ensemble estimate: V_n = (mean_j r_n^(j) r_n^(j)T + ridge)^{-1/2} over
/// unattacked traces with independent seeds. A ridge of
/// 1e-9 * mean diagonal is added before inversion. Throws when fewer traces
/// than measurement dimensions are supplied (rank-deficient covariance).
NormalizationSchedule estimate_normalization_ensemble(
    const std::vector<DetectionTrace>& traces, const std::vector<Eigen::MatrixXd>& C);

/// Time-invariant fallback: one V from the residual covariance averaged over
/// both the ensemble and time.
Eigen::MatrixXd lti_baseline_normalization(const std::vector<DetectionTrace>& traces);

struct DetectorConfig {
  int window = 21;            // l+1 samples per window; must be >= q+r
  int watermark_delay = 1;    // psi stacks e_{n-delay}; LTI path uses k'+1
  Eigen::MatrixXd S;          // blkdiag(I_r, Sigma_e), built by make_scale_matrix
  double threshold = std::numeric_limits<double>::infinity();

  int ell() const { return window - 1; }
  void validate(int q, int r) const;
};

/// Exact block-diagonal scale matrix [I_r, 0; 0, Sigma_e].
Eigen::MatrixXd make_scale_matrix(int r, const Eigen::MatrixXd& Sigma_e);

/// Negative log likelihood of scale S given the sampled window matrix Q.
/// |Q| <= 0 is clamped on an eigenvalue floor of 1e-300 and flagged.
double wishart_nll(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& S_inv,
                   int q, int r, int ell, bool* degenerate = nullptr);

/// Sliding accumulator for Q_n. The outer-product sum is maintained by
/// rank-one update/downdate with a full rebuild every 1024 pushes to bound
/// drift.
class WindowStatistic {
 public:
  WindowStatistic(int dim, int window);

  /// Appends psi and returns the current Q sum (valid once full()).
  void push(const Eigen::VectorXd& psi);
  bool full() const { return static_cast<int>(buffer_.size()) == window_; }
  const Eigen::MatrixXd& Q() const { return Q_; }
  const std::deque<Eigen::VectorXd>& buffer() const { return buffer_; }

 private:
  void rebuild();
  int window_;
  long pushes_ = 0;
  std::deque<Eigen::VectorXd> buffer_;
  Eigen::MatrixXd Q_;
};

struct ScoreResult {
  std::optional<double> metric;  // empty while the window is filling
  bool alarm = false;
  bool degenerate = false;       // |Q| hit the eigenvalue floor
};

/// Pushes psi_n = [V_n * residual; e_delayed] and, once the window is full,
/// evaluates the metric and compares against config.threshold.
ScoreResult push_and_score(WindowStatistic& stat, const Eigen::VectorXd& residual,
                           const Eigen::MatrixXd& V_n, const Eigen::VectorXd& e_delayed,
                           const DetectorConfig& config);

/// Per-step metric series for a whole trace. Scoring starts at
/// n = watermark_delay (the first step with a delayed watermark available);
/// earlier steps report NaN. Also fills trace.metric / trace.alarm when
/// `annotate` is set. Overlapping-window alarms closer than one window are
/// grouped into a single alarm event for rate accounting.
struct MetricSeries {
  std::vector<double> metric;      // NaN when pending
  std::vector<uint8_t> alarm;
  std::vector<int> event_id;       // 0 = no alarm, else 1-based event index
  int num_events = 0;
  int first_alarm_step = -1;
};
MetricSeries score_trace(const DetectionTrace& trace, const std::vector<Eigen::MatrixXd>& V,
                         const DetectorConfig& config, DetectionTrace* annotate = nullptr);

/// Empirical (1 - dt * target_rate) quantile of pooled no-attack metric
/// samples. target_rate is alarms per second; rate <= 0 returns +infinity
/// (never alarm). Throws when fewer than ceil(1/(dt*rate)) samples are
/// supplied, naming the required count.
double calibrate_threshold(const std::vector<double>& pooled_metrics, double dt,
                           double target_rate_per_s);

/// Sample averages of the two asymptotic statistics:
///   C1 = mean_n V_n (C_n xhat_n - y_n) e_{n-1}^T        (n >= 1)
///   C2 = mean_n V_n (C_n xhat_n - y_n)(...)^T V_n^T     (n >= 0)
struct AsymptoticStats {
  Eigen::MatrixXd C1;  // r x q
  Eigen::MatrixXd C2;  // r x r
};
AsymptoticStats asymptotic_statistics(const DetectionTrace& trace,
                                      const std::vector<Eigen::MatrixXd>& V,
                                      const std::vector<Eigen::MatrixXd>& C);

}  // namespace ltvdw
