#pragma once

// Cholesky factors of correlation matrices: the canonical-partial-correlation
// (CPC) bijection from R^{D(D-1)/2}, and the LKJ density on the factor.

#include <Eigen/Core>
#include <random>

namespace lhsgp {

inline Eigen::Index corr_free_size(Eigen::Index dim) { return dim * (dim - 1) / 2; }

struct CorrCholesky {
  Eigen::MatrixXd lower;       // A with unit-norm rows, C = A A^T
  double log_jacobian = 0.0;   // log |d vech(A) / d y|
};

/// y (length D(D-1)/2, row-major over the strict lower triangle) -> A.
CorrCholesky corr_cholesky_constrain(const Eigen::VectorXd& y, Eigen::Index dim);

/// Inverse of corr_cholesky_constrain.
Eigen::VectorXd corr_cholesky_unconstrain(const Eigen::MatrixXd& lower);

/// log normalising constant c_D(eta) of LKJ(eta) over D x D correlations.
double lkj_log_normalizer(Eigen::Index dim, double eta);

/// log LKJ(eta) density of C = A A^T expressed on the Cholesky factor A.
double lkj_cholesky_log_density(const Eigen::MatrixXd& lower, double eta);

/// Log density on the unconstrained scale: LKJ on A plus the transform's
/// log-Jacobian, together with its gradient with respect to y given the
/// adjoint `grad_lower` = d(outer objective)/dA (lower triangle used). The
/// gradient returned is of (outer objective + LKJ + log-Jacobian).
double corr_log_density_gradient(const Eigen::VectorXd& y, Eigen::Index dim,
                                 double eta, const Eigen::MatrixXd& grad_lower,
                                 Eigen::Ref<Eigen::VectorXd> grad_y);

/// Draws a D x D correlation matrix from LKJ(eta) with the onion method.
Eigen::MatrixXd sample_lkj(Eigen::Index dim, double eta, std::mt19937_64& rng);

}  // namespace lhsgp
