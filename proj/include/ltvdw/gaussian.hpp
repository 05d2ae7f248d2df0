#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ltvdw/rng.hpp"

namespace ltvdw {

/// One zero-mean Gaussian draw with the given covariance: returns F*z where
/// F F^T = cov (symmetric PSD factor) and z is standard normal. cov = 0
/// yields the zero vector. Throws on non-symmetric or indefinite cov.
Eigen::VectorXd draw_gaussian(const Eigen::MatrixXd& cov, Rng& rng,
                              const std::string& name = "covariance");

/// Precomputed factor for repeated draws from one covariance.
class GaussianSampler {
 public:
  GaussianSampler() = default;
  GaussianSampler(const Eigen::MatrixXd& cov, const std::string& name = "covariance");

  Eigen::VectorXd draw(Rng& rng) const;
  int dim() const { return static_cast<int>(factor_.rows()); }

 private:
  Eigen::MatrixXd factor_;
};

/// Per-step factors for a covariance schedule.
std::vector<GaussianSampler> make_samplers(const std::vector<Eigen::MatrixXd>& covs,
                                           const std::string& name);

}  // namespace ltvdw
