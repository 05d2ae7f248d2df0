#include "ltvdw/detector.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "ltvdw/linalg.hpp"

namespace ltvdw {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<MatrixXd> propagate_error_covariance(const StateSpaceSchedule& sys,
                                                 const GainSchedule& gains,
                                                 const NoiseSchedule& noise, int horizon) {
  if (horizon > sys.horizon) {
    throw std::invalid_argument("propagate_error_covariance: horizon exceeds schedule");
  }
  const int p = sys.p();
  std::vector<MatrixXd> out;
  out.reserve(horizon);
  MatrixXd sigma = MatrixXd::Zero(p, p);  // delta_bar_0 = 0
  for (int n = 0; n < horizon; ++n) {
    out.push_back(sigma);
    const MatrixXd A_under = sys.A[n] + gains.L[n] * sys.C[n];
    MatrixXd next = A_under * sigma * A_under.transpose() + noise.Sigma_w[n] +
                    gains.L[n] * noise.Sigma_z[n] * gains.L[n].transpose();
    sigma = 0.5 * (next + next.transpose());
  }
  return out;
}

MatrixXd normalization_factor(const MatrixXd& Sigma_delta, const MatrixXd& C,
                              const MatrixXd& Sigma_z) {
  const MatrixXd m = C * Sigma_delta * C.transpose() + Sigma_z;
  return inverse_sqrt_spd(0.5 * (m + m.transpose()), "residual covariance");
}

NormalizationSchedule analytic_normalization(const StateSpaceSchedule& sys,
                                             const GainSchedule& gains,
                                             const NoiseSchedule& noise, int horizon) {
  NormalizationSchedule out;
  out.Sigma_delta = propagate_error_covariance(sys, gains, noise, horizon);
  out.V.reserve(horizon);
  for (int n = 0; n < horizon; ++n) {
    out.V.push_back(normalization_factor(out.Sigma_delta[n], sys.C[n], noise.Sigma_z[n]));
  }
  return out;
}

NormalizationSchedule estimate_normalization_ensemble(
    const std::vector<DetectionTrace>& traces, const std::vector<MatrixXd>& C) {
  if (traces.empty()) throw std::invalid_argument("ensemble estimate: no traces");
  const int i = static_cast<int>(traces.size());
  const int horizon = traces[0].steps();
  if (horizon == 0) throw std::invalid_argument("ensemble estimate: empty traces");
  const int r = static_cast<int>(traces[0].residual[0].size());
  if (i < r) {
    throw std::invalid_argument("ensemble estimate: " + std::to_string(i) +
                                " traces cannot identify a rank-" + std::to_string(r) +
                                " residual covariance");
  }
  if (static_cast<int>(C.size()) < horizon) {
    throw std::invalid_argument("ensemble estimate: C schedule shorter than traces");
  }
  NormalizationSchedule out;
  out.V.reserve(horizon);
  for (int n = 0; n < horizon; ++n) {
    MatrixXd cov = MatrixXd::Zero(r, r);
    for (const auto& trace : traces) {
      if (trace.steps() != horizon) {
        throw std::invalid_argument("ensemble estimate: traces differ in length");
      }
      cov.noalias() += trace.residual[n] * trace.residual[n].transpose();
    }
    cov /= static_cast<double>(i);
    const double ridge = 1e-9 * std::max(cov.trace() / r, 1e-300);
    cov += ridge * MatrixXd::Identity(r, r);
    out.V.push_back(inverse_sqrt_spd(0.5 * (cov + cov.transpose()),
                                     "ensemble residual covariance"));
  }
  return out;
}

MatrixXd lti_baseline_normalization(const std::vector<DetectionTrace>& traces) {
  if (traces.empty() || traces[0].steps() == 0) {
    throw std::invalid_argument("lti normalization: no residual samples");
  }
  const int r = static_cast<int>(traces[0].residual[0].size());
  MatrixXd cov = MatrixXd::Zero(r, r);
  long count = 0;
  for (const auto& trace : traces) {
    for (int n = 0; n < trace.steps(); ++n) {
      cov.noalias() += trace.residual[n] * trace.residual[n].transpose();
      ++count;
    }
  }
  if (count < r) throw std::invalid_argument("lti normalization: too few residual samples");
  cov /= static_cast<double>(count);
  const double ridge = 1e-9 * std::max(cov.trace() / r, 1e-300);
  cov += ridge * MatrixXd::Identity(r, r);
  return inverse_sqrt_spd(0.5 * (cov + cov.transpose()), "pooled residual covariance");
}

void DetectorConfig::validate(int q, int r) const {
  if (window < q + r) {
    throw std::invalid_argument("detector window " + std::to_string(window) +
                                " must be at least q+r = " + std::to_string(q + r));
  }
  if (watermark_delay < 1) throw std::invalid_argument("watermark_delay must be >= 1");
  if (S.rows() != q + r || S.cols() != q + r) {
    throw std::invalid_argument("scale matrix S has wrong dimensions");
  }
}

MatrixXd make_scale_matrix(int r, const MatrixXd& Sigma_e) {
  const int q = static_cast<int>(Sigma_e.rows());
  MatrixXd S = MatrixXd::Zero(r + q, r + q);
  S.topLeftCorner(r, r) = MatrixXd::Identity(r, r);
  S.bottomRightCorner(q, q) = Sigma_e;
  return S;
}

double wishart_nll(const MatrixXd& Q, const MatrixXd& S_inv, int q, int r, int ell,
                   bool* degenerate) {
  const double logdet = log_det_floored(Q, 1e-300, degenerate);
  return static_cast<double>(q + r - ell) * logdet + (S_inv * Q).trace();
}

WindowStatistic::WindowStatistic(int dim, int window)
    : window_(window), Q_(MatrixXd::Zero(dim, dim)) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (dim < 1) throw std::invalid_argument("psi dimension must be >= 1");
}

void WindowStatistic::push(const VectorXd& psi) {
  if (psi.size() != Q_.rows()) {
    throw std::invalid_argument("psi dimension mismatch in WindowStatistic");
  }
  buffer_.push_back(psi);
  Q_.noalias() += psi * psi.transpose();
  if (static_cast<int>(buffer_.size()) > window_) {
    const VectorXd& old = buffer_.front();
    Q_.noalias() -= old * old.transpose();
    buffer_.pop_front();
  }
  if (++pushes_ % 1024 == 0) rebuild();  // bound round-off drift
}

void WindowStatistic::rebuild() {
  Q_.setZero();
  for (const auto& psi : buffer_) Q_.noalias() += psi * psi.transpose();
}

ScoreResult push_and_score(WindowStatistic& stat, const VectorXd& residual,
                           const MatrixXd& V_n, const VectorXd& e_delayed,
                           const DetectorConfig& config) {
  const int r = static_cast<int>(residual.size());
  const int q = static_cast<int>(e_delayed.size());
  VectorXd psi(r + q);
  psi.head(r) = V_n * residual;
  psi.tail(q) = e_delayed;
  stat.push(psi);

  ScoreResult result;
  if (!stat.full()) return result;

  // S is block diagonal; its inverse is cheap but computed on demand only
  // for clarity. score_trace caches it.
  const MatrixXd S_inv = config.S.inverse();
  bool degenerate = false;
  const double metric = wishart_nll(stat.Q(), S_inv, q, r, config.ell(), &degenerate);
  result.metric = metric;
  result.degenerate = degenerate;
  result.alarm = metric > config.threshold;
  return result;
}

MetricSeries score_trace(const DetectionTrace& trace, const std::vector<MatrixXd>& V,
                         const DetectorConfig& config, DetectionTrace* annotate) {
  const int N = trace.steps();
  MetricSeries series;
  series.metric.assign(N, std::numeric_limits<double>::quiet_NaN());
  series.alarm.assign(N, 0);
  series.event_id.assign(N, 0);
  if (N == 0) return series;

  const int r = static_cast<int>(trace.residual[0].size());
  const int q = static_cast<int>(trace.e[0].size());
  config.validate(q, r);
  if (static_cast<int>(V.size()) < N) {
    throw std::invalid_argument("score_trace: normalization schedule shorter than trace");
  }

  const MatrixXd S_inv = config.S.inverse();
  WindowStatistic stat(r + q, config.window);
  const int delay = config.watermark_delay;
  int last_alarm_step = std::numeric_limits<int>::min() / 2;

  for (int n = delay; n < N; ++n) {
    VectorXd psi(r + q);
    psi.head(r) = V[n] * trace.residual[n];
    psi.tail(q) = trace.e[n - delay];
    stat.push(psi);
    if (!stat.full()) continue;

    bool degenerate = false;
    const double metric = wishart_nll(stat.Q(), S_inv, q, r, config.ell(), &degenerate);
    series.metric[n] = metric;
    const bool alarm = metric > config.threshold;
    series.alarm[n] = alarm ? 1 : 0;
    if (alarm) {
      if (n - last_alarm_step >= config.window) {
        ++series.num_events;  // overlapping-window alarms count as one event
      }
      series.event_id[n] = series.num_events;
      last_alarm_step = n;
      if (series.first_alarm_step < 0) series.first_alarm_step = n;
    }
    if (annotate) {
      annotate->metric[n] = metric;
      annotate->alarm[n] = series.alarm[n];
    }
  }
  return series;
}

double calibrate_threshold(const std::vector<double>& pooled_metrics, double dt,
                           double target_rate_per_s) {
  if (dt <= 0.0) throw std::invalid_argument("calibrate_threshold: dt must be positive");
  if (target_rate_per_s <= 0.0) return std::numeric_limits<double>::infinity();
  const double p = dt * target_rate_per_s;  // per-sample exceedance budget
  if (p >= 1.0) throw std::invalid_argument("calibrate_threshold: rate too high for dt");

  std::vector<double> finite;
  finite.reserve(pooled_metrics.size());
  for (double m : pooled_metrics) {
    if (std::isfinite(m)) finite.push_back(m);
  }
  const auto required = static_cast<size_t>(std::ceil(1.0 / p));
  if (finite.size() < required) {
    throw std::invalid_argument("calibrate_threshold: need at least " +
                                std::to_string(required) + " samples, got " +
                                std::to_string(finite.size()));
  }
  std::sort(finite.begin(), finite.end());
  // nearest-rank (1 - p) quantile
  const auto rank = static_cast<size_t>(
      std::ceil((1.0 - p) * static_cast<double>(finite.size())));
  return finite[std::min(finite.size() - 1, rank == 0 ? 0 : rank - 1)];
}

AsymptoticStats asymptotic_statistics(const DetectionTrace& trace,
                                      const std::vector<MatrixXd>& V,
                                      const std::vector<MatrixXd>& C) {
  const int N = trace.steps();
  if (N < 2) throw std::invalid_argument("asymptotic_statistics: trace too short");
  if (static_cast<int>(V.size()) < N || static_cast<int>(C.size()) < N) {
    throw std::invalid_argument("asymptotic_statistics: schedule shorter than trace");
  }
  const int r = static_cast<int>(trace.residual[0].size());
  const int q = static_cast<int>(trace.e[0].size());

  AsymptoticStats stats;
  stats.C1 = MatrixXd::Zero(r, q);
  stats.C2 = MatrixXd::Zero(r, r);
  for (int n = 0; n < N; ++n) {
    const VectorXd nr = V[n] * trace.residual[n];
    stats.C2.noalias() += nr * nr.transpose();
    if (n >= 1) stats.C1.noalias() += nr * trace.e[n - 1].transpose();
  }
  stats.C1 /= static_cast<double>(N - 1);
  stats.C2 /= static_cast<double>(N);
  return stats;
}

}  // namespace ltvdw
