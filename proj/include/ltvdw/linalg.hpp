#pragma once

#include <Eigen/Dense>
#include <string>

namespace ltvdw {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Largest singular value (matrix 2-norm).
double spectral_norm(const MatrixXd& m);

/// Throws std::invalid_argument if m is not square and symmetric to
/// a relative tolerance of 1e-9. `name` identifies the offending matrix
/// in the message.
void require_symmetric(const MatrixXd& m, const std::string& name);

/// Symmetric factor F with F*F^T = cov for a symmetric positive
/// semidefinite matrix, via eigendecomposition. Eigenvalues in
/// [-1e-12 * scale, 0) are clamped to zero; anything below that bound
/// throws std::invalid_argument naming `name`.
MatrixXd sqrt_factor_psd(const MatrixXd& cov, const std::string& name = "covariance");

/// Principal (symmetric positive definite) square root of an SPD matrix.
MatrixXd symmetric_sqrt_spd(const MatrixXd& m, const std::string& name = "matrix");

/// Principal inverse square root of an SPD matrix. Throws
/// std::invalid_argument if the matrix is not positive definite.
MatrixXd inverse_sqrt_spd(const MatrixXd& m, const std::string& name = "matrix");

/// Natural log of det(Q) for symmetric Q with eigenvalues floored at
/// `floor_val`. Sets `*degenerate` (if provided) when any eigenvalue was
/// at or below zero.
double log_det_floored(const MatrixXd& q, double floor_val = 1e-300,
                       bool* degenerate = nullptr);

}  // namespace ltvdw
