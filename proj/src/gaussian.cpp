#include "ltvdw/gaussian.hpp"

#include "ltvdw/linalg.hpp"

namespace ltvdw {

Eigen::VectorXd draw_gaussian(const Eigen::MatrixXd& cov, Rng& rng,
                              const std::string& name) {
  return sqrt_factor_psd(cov, name) * rng.normal_vector(static_cast<int>(cov.rows()));
}

GaussianSampler::GaussianSampler(const Eigen::MatrixXd& cov, const std::string& name)
    : factor_(sqrt_factor_psd(cov, name)) {}

Eigen::VectorXd GaussianSampler::draw(Rng& rng) const {
  return factor_ * rng.normal_vector(dim());
}

std::vector<GaussianSampler> make_samplers(const std::vector<Eigen::MatrixXd>& covs,
                                           const std::string& name) {
  std::vector<GaussianSampler> out;
  out.reserve(covs.size());
  for (size_t n = 0; n < covs.size(); ++n) {
    out.emplace_back(covs[n], name + "[" + std::to_string(n) + "]");
  }
  return out;
}

}  // namespace ltvdw
