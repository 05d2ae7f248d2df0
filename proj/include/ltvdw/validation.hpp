#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ltvdw/attack.hpp"
#include "ltvdw/scenario.hpp"

namespace ltvdw {

// ---------------------------------------------------------------------------
// Monte Carlo harness for the asymptotic claims. Convergence in probability
// is operationalized as replicated-average norms decaying along a sample
// size ladder: a statistic is `converging` when its norm at the largest
// size is below an absolute tolerance AND the fitted log-log decay exponent
// is at most -0.3 (root-N averaging gives -0.5). These thresholds are
// repo-level constants.
// ---------------------------------------------------------------------------

struct ConvergenceReport {
  std::string statistic;
  std::vector<long> sample_sizes;
  std::vector<double> norms;      // replication-averaged
  double fitted_exponent = 0.0;
  double abs_tolerance = 0.0;
  bool converging = false;

  std::string to_text() const;
};

/// Least-squares slope of log(norm) against log(size).
double fit_decay_exponent(const std::vector<long>& sizes, const std::vector<double>& norms);

constexpr double kC1AbsTolerance = 0.02;   // scalar loops, i = 1e5
constexpr double kC2AbsTolerance = 0.05;
constexpr double kDecayExponentBound = -0.3;
constexpr double kPlateauSeparation = 10.0;

/// Norm ladders for C1 and ||C2 - I|| on the given scenario, with or
/// without an attack. Each (size, replication) pair simulates an
/// independent trace with a seed derived from root_seed.
std::pair<ConvergenceReport, ConvergenceReport> check_c1_c2(
    const Scenario& scenario, const std::optional<AttackConfig>& attack,
    const std::vector<long>& sample_sizes, int replications, std::uint64_t root_seed,
    double c1_tol = kC1AbsTolerance, double c2_tol = kC2AbsTolerance);

/// For alpha = 0 (with the nominal noise levels as false-state noise) C1
/// must converge; for each alpha != 0 the C1 norm at the largest size must
/// plateau above kPlateauSeparation times the alpha = 0 value.
struct AlphaSweepReport {
  std::vector<double> alphas;
  std::vector<double> final_norms;   // C1 norm at largest sample size
  double baseline_norm = 0.0;        // alpha = 0
  std::vector<bool> non_converging;  // per alpha != 0 entry: plateau detected
  bool pass = false;
  std::string to_text() const;
};
AlphaSweepReport check_alpha_iff_c1(const Scenario& scenario, const std::vector<double>& alphas,
                                    const std::vector<long>& sample_sizes, int replications,
                                    std::uint64_t root_seed);

/// Distribution check of the window matrix under no attack: empirical mean
/// of Q over disjoint steady-state windows against window_samples * S, and
/// two-sample Kolmogorov-Smirnov distance between empirical metric values
/// and a synthetic Wishart(S, window_samples) oracle.
struct WishartWindowReport {
  int window_samples = 0;
  int num_windows = 0;
  double max_rel_mean_error = 0.0;  // elementwise vs window * S
  double ks_distance = 0.0;
  std::string to_text() const;
};
WishartWindowReport check_wishart_window(const Scenario& scenario, int window_samples,
                                         int num_windows, std::uint64_t root_seed,
                                         int burn_in = 200);

/// Wishart(scale, dof) sample as a sum of dof outer products of
/// N(0, scale) vectors; `scale_factor` is any F with F F^T = scale.
Eigen::MatrixXd sample_wishart(const Eigen::MatrixXd& scale_factor, int dof, Rng& rng);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_distance(std::vector<double> a, std::vector<double> b);

}  // namespace ltvdw
