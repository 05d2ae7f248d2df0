#include "ltvdw/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace ltvdw {

double spectral_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<MatrixXd>(m).singularValues()(0);
}

void require_symmetric(const MatrixXd& m, const std::string& name) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(name + " is not square (" + std::to_string(m.rows()) +
                                "x" + std::to_string(m.cols()) + ")");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * scale) {
    throw std::invalid_argument(name + " is not symmetric (max asymmetry " +
                                std::to_string(asym) + ")");
  }
}

MatrixXd sqrt_factor_psd(const MatrixXd& cov, const std::string& name) {
  require_symmetric(cov, name);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  VectorXd lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (int i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -1e-12 * scale) {
      throw std::invalid_argument(name + " is not positive semidefinite (eigenvalue " +
                                  std::to_string(lambda(i)) + ")");
    }
    lambda(i) = std::max(lambda(i), 0.0);
  }
  return eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

MatrixXd symmetric_sqrt_spd(const MatrixXd& m, const std::string& name) {
  require_symmetric(m, name);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  const VectorXd& lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() <= 1e-14 * scale) {
    throw std::invalid_argument(name + " is not positive definite (min eigenvalue " +
                                std::to_string(lambda.minCoeff()) + ")");
  }
  return eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

MatrixXd inverse_sqrt_spd(const MatrixXd& m, const std::string& name) {
  require_symmetric(m, name);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  const VectorXd& lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() <= 1e-14 * scale) {
    throw std::invalid_argument(name + " is not positive definite (min eigenvalue " +
                                std::to_string(lambda.minCoeff()) + ")");
  }
  return eig.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

double log_det_floored(const MatrixXd& q, double floor_val, bool* degenerate) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(q, Eigen::EigenvaluesOnly);
  bool hit = false;
  double sum = 0.0;
  for (int i = 0; i < eig.eigenvalues().size(); ++i) {
    double lam = eig.eigenvalues()(i);
    if (lam <= 0.0) hit = true;
    sum += std::log(std::max(lam, floor_val));
  }
  if (degenerate) *degenerate = hit;
  return sum;
}

}  // namespace ltvdw
