#pragma once

// Reduced-rank (Hilbert space) GP machinery: Dirichlet Laplacian eigenpairs
// on [-L, L], basis matrices, and the linearised GP representation.

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <string>

#include "lhsgp/spectral.hpp"

namespace lhsgp {

template <typename Scalar = double>
struct BasisSet {
  Scalar L = Scalar(1);
  Eigen::Index M = 0;
  Scalar center = Scalar(0);
  VectorX<Scalar> eigenvalues;       // lambda_j = (j pi / 2L)^2
  VectorX<Scalar> sqrt_eigenvalues;  // sqrt(lambda_j)

  /// Largest |x - center| mapped without clamping.
  Scalar clamp_radius() const { return L - Scalar(1e-9) * L; }
};

using Basis = BasisSet<double>;

/// Basis on the domain [x_lo, x_hi] widened by the boundary factor c.
template <typename Scalar = double>
BasisSet<Scalar> make_basis(Scalar x_lo, Scalar x_hi, Scalar c, Eigen::Index M) {
  if (!(x_hi > x_lo) || !std::isfinite(static_cast<double>(x_lo)) ||
      !std::isfinite(static_cast<double>(x_hi)))
    throw InvalidDomain("basis domain needs x_hi > x_lo");
  if (!(c > Scalar(1))) throw InvalidDomain("boundary factor c must exceed 1");
  if (M < 1) throw InvalidDomain("basis needs M >= 1");
  BasisSet<Scalar> basis;
  basis.center = (x_lo + x_hi) / Scalar(2);
  basis.L = c * (x_hi - x_lo) / Scalar(2);
  basis.M = M;
  basis.sqrt_eigenvalues.resize(M);
  for (Eigen::Index j = 0; j < M; ++j)
    basis.sqrt_eigenvalues(j) =
        Scalar(j + 1) * std::numbers::pi_v<Scalar> / (Scalar(2) * basis.L);
  basis.eigenvalues = basis.sqrt_eigenvalues.array().square();
  return basis;
}

template <typename Scalar>
struct PhiMatrix {
  MatrixX<Scalar> phi;   // N x M, phi_j(x_i)
  MatrixX<Scalar> dphi;  // N x M, d phi_j / dx at x_i (zero where clamped)
  Eigen::Index clamped = 0;
};

/// Evaluates phi_j(x) = sqrt(1/L) sin(sqrt(lambda_j) (x - center + L)).
/// Inputs outside (-L, L) after centring are clamped and counted.
template <typename Scalar>
PhiMatrix<Scalar> phi_with_derivative(const BasisSet<Scalar>& basis,
                                      const Vec<Scalar>& xs,
                                      bool with_derivative = true) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Eigen::Index n = xs.size();
  const Eigen::Index m = basis.M;
  PhiMatrix<Scalar> out;
  out.phi.resize(n, m);
  if (with_derivative) out.dphi.resize(n, m);
  const Scalar inv_sqrt_l = Scalar(1) / sqrt(basis.L);
  const Scalar bound = basis.clamp_radius();
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar xt = xs(i) - basis.center;
    bool clamped = false;
    if (xt > bound) {
      xt = bound;
      clamped = true;
    } else if (xt < -bound) {
      xt = -bound;
      clamped = true;
    }
    out.clamped += clamped ? 1 : 0;
    const Scalar shifted = xt + basis.L;
    // sin/cos of j*theta by the angle-addition recurrence
    const Scalar theta = basis.sqrt_eigenvalues(0) * shifted;
    const Scalar s1 = sin(theta), c1 = cos(theta);
    Scalar s = s1, c = c1;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j > 0 && j % 16 == 0) {
        // re-anchor periodically to keep the recurrence accurate
        const Scalar t = basis.sqrt_eigenvalues(j) * shifted;
        s = sin(t);
        c = cos(t);
      }
      out.phi(i, j) = inv_sqrt_l * s;
      if (with_derivative)
        out.dphi(i, j) = clamped ? Scalar(0) : inv_sqrt_l * basis.sqrt_eigenvalues(j) * c;
      const Scalar s_next = s * c1 + c * s1;
      c = c * c1 - s * s1;
      s = s_next;
    }
  }
  return out;
}

/// N x M matrix of basis functions; see phi_with_derivative.
template <typename Scalar>
PhiMatrix<Scalar> phi_matrix(const BasisSet<Scalar>& basis,
                             const Vec<Scalar>& xs) {
  return phi_with_derivative(basis, xs, false);
}

/// S(sqrt(lambda_j)) for j = 1..M.
template <typename Scalar>
VectorX<Scalar> spectral_weights(const BasisSet<Scalar>& basis,
                                 const SpectralDensity<Scalar>& sd) {
  validate(sd);
  VectorX<Scalar> w(basis.M);
  for (Eigen::Index j = 0; j < basis.M; ++j)
    w(j) = spectral_eval(sd, basis.sqrt_eigenvalues(j));
  return w;
}

/// sum_j S(sqrt(lambda_j)) phi_j(x) phi_j(xp).
template <typename Scalar>
Scalar approx_kernel(const BasisSet<Scalar>& basis,
                     const SpectralDensity<Scalar>& sd, Arg<Scalar> x, Arg<Scalar> xp) {
  if (basis.M == 0) return Scalar(0);
  VectorX<Scalar> pts(2);
  pts << x, xp;
  const auto phi = phi_matrix(basis, pts).phi;
  const VectorX<Scalar> w = spectral_weights(basis, sd);
  return (phi.row(0).transpose().array() * w.array() * phi.row(1).transpose().array())
      .sum();
}

/// Reduced-rank covariance Phi diag(S) Phi^T on the given inputs.
template <typename Scalar>
MatrixX<Scalar> approx_gram(const BasisSet<Scalar>& basis,
                            const SpectralDensity<Scalar>& sd,
                            const Vec<Scalar>& xs) {
  const MatrixX<Scalar> phi = phi_matrix(basis, xs).phi;
  const VectorX<Scalar> w = spectral_weights(basis, sd);
  return phi * w.asDiagonal() * phi.transpose();
}

/// f(x_i) = mu + sum_j sqrt(S(sqrt(lambda_j))) phi_j(x_i) beta_j.
template <typename Scalar>
VectorX<Scalar> gp_linear_predict(const BasisSet<Scalar>& basis,
                                  const SpectralDensity<Scalar>& sd, Arg<Scalar> mu,
                                  const Vec<Scalar>& beta,
                                  const Vec<Scalar>& xs) {
  if (beta.size() != basis.M)
    throw ShapeError("beta has " + std::to_string(beta.size()) +
                     " entries, basis has M = " + std::to_string(basis.M));
  const MatrixX<Scalar> phi = phi_matrix(basis, xs).phi;
  const VectorX<Scalar> w = spectral_weights(basis, sd).array().sqrt();
  VectorX<Scalar> f = phi * (w.array() * beta.array()).matrix();
  f.array() += mu;
  return f;
}

}  // namespace lhsgp
