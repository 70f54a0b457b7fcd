#pragma once

// Stationary 1-D covariance functions and their derivative kernels
// k^(a,b)(x, x') = d^a/dx^a d^b/dx'^b k(x - x').

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <span>
#include <string>
#include <type_traits>

#include "lhsgp/errors.hpp"

namespace lhsgp {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Non-deduced parameter types: the scalar is fixed by the spec argument, so
// literals and Eigen expressions convert implicitly.
template <typename Scalar>
using Arg = std::type_identity_t<Scalar>;
template <typename Scalar>
using Vec = std::type_identity_t<VectorX<Scalar>>;

enum class KernelFamily { SquaredExponential, Matern };

template <typename Scalar = double>
struct KernelSpec {
  KernelFamily family = KernelFamily::SquaredExponential;
  Scalar nu = Scalar(0);  // Matern smoothness, unused for SE
  Scalar alpha = Scalar(1);
  Scalar rho = Scalar(1);
  int a = 0;
  int b = 0;

  static KernelSpec squared_exponential(Scalar alpha, Scalar rho, int a = 0,
                                        int b = 0) {
    return {KernelFamily::SquaredExponential, Scalar(0), alpha, rho, a, b};
  }
  static KernelSpec matern(Scalar nu, Scalar alpha, Scalar rho, int a = 0,
                           int b = 0) {
    return {KernelFamily::Matern, nu, alpha, rho, a, b};
  }

  int order() const { return a + b; }
  KernelSpec base() const {
    KernelSpec out = *this;
    out.a = out.b = 0;
    return out;
  }
};

using Kernel = KernelSpec<double>;

/// Highest total derivative order a+b supported for each family.
inline constexpr int kMaxSquaredExponentialOrder = 4;
inline constexpr int kMaxMaternOrder = 2;

/// True iff k^(a,b) of an admissible stationary kernel is positive
/// semidefinite: a+b even and a+3b = 0 (mod 4).
inline bool is_psd_derivative(int a, int b) {
  if (a < 0 || b < 0) return false;
  return (a + b) % 2 == 0 && (a + 3 * b) % 4 == 0;
}

/// Multi-index version for p-dimensional inputs: every a_j+b_j even and
/// |a|+3|b| = 0 (mod 4).
inline bool is_psd_derivative(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) return false;
  int abs_a = 0, abs_b = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] < 0 || b[j] < 0) return false;
    if ((a[j] + b[j]) % 2 != 0) return false;
    abs_a += a[j];
    abs_b += b[j];
  }
  return (abs_a + 3 * abs_b) % 4 == 0;
}

namespace detail {

inline bool is_half_integer(double nu, double target) {
  return std::abs(nu - target) < 1e-12;
}

// Probabilists' Hermite polynomial He_n(u).
template <typename Scalar>
Scalar hermite_e(int n, Scalar u) {
  Scalar h0 = Scalar(1);
  if (n == 0) return h0;
  Scalar h1 = u;
  for (int k = 1; k < n; ++k) {
    Scalar h2 = u * h1 - Scalar(k) * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

// n-th derivative in r of the unit-variance Matern kernel for the closed-form
// half-integer cases.
template <typename Scalar>
Scalar matern_radial_derivative(Scalar nu, Scalar rho, int n, Scalar r) {
  using std::abs;
  using std::exp;
  using std::sqrt;
  const double nu_d = static_cast<double>(nu);
  const Scalar ar = abs(r);
  if (is_half_integer(nu_d, 0.5)) {
    if (n != 0) throw UnsupportedKernel("Matern 1/2 has no derivative kernels");
    return exp(-ar / rho);
  }
  if (is_half_integer(nu_d, 1.5)) {
    const Scalar c = sqrt(Scalar(3)) / rho;
    const Scalar e = exp(-c * ar);
    switch (n) {
      case 0: return (Scalar(1) + c * ar) * e;
      case 1: return -c * c * r * e;
      case 2: return -c * c * (Scalar(1) - c * ar) * e;
    }
  }
  if (is_half_integer(nu_d, 2.5)) {
    const Scalar c = sqrt(Scalar(5)) / rho;
    const Scalar e = exp(-c * ar);
    switch (n) {
      case 0: return (Scalar(1) + c * ar + c * c * r * r / Scalar(3)) * e;
      case 1: return -c * c / Scalar(3) * r * (Scalar(1) + c * ar) * e;
      case 2: return -c * c / Scalar(3) * (Scalar(1) + c * ar - c * c * r * r) * e;
    }
  }
  if (n == 0) {
    // General smoothness through the modified Bessel function.
    if (ar == Scalar(0)) return Scalar(1);
    const Scalar z = sqrt(Scalar(2) * nu) * ar / rho;
    return std::pow(Scalar(2), Scalar(1) - nu) / std::tgamma(nu) *
           std::pow(z, nu) * std::cyl_bessel_k(nu, z);
  }
  throw UnsupportedKernel("Matern derivative kernels need nu in {3/2, 5/2}");
}

}  // namespace detail

/// Throws if `spec` violates its invariants or names an unsupported
/// (family, derivative, smoothness) combination.
template <typename Scalar>
void validate(const KernelSpec<Scalar>& spec) {
  using std::isfinite;
  if (!(spec.alpha > Scalar(0)) || !(spec.rho > Scalar(0)) ||
      !isfinite(static_cast<double>(spec.alpha)) ||
      !isfinite(static_cast<double>(spec.rho)))
    throw InvalidInput("kernel needs alpha > 0 and rho > 0");
  if (spec.a < 0 || spec.b < 0)
    throw UnsupportedKernel("derivative orders must be non-negative");
  if (spec.family == KernelFamily::SquaredExponential) {
    if (spec.order() > kMaxSquaredExponentialOrder)
      throw UnsupportedKernel("squared exponential derivative order a+b > " +
                              std::to_string(kMaxSquaredExponentialOrder));
    return;
  }
  const double nu = static_cast<double>(spec.nu);
  if (!(nu > 0.0) || !std::isfinite(nu))
    throw InvalidInput("Matern smoothness must be positive");
  if (spec.order() == 0) return;
  if (spec.order() > kMaxMaternOrder)
    throw UnsupportedKernel("Matern derivative order a+b > 2");
  if (!(static_cast<double>(spec.order()) < 2.0 * nu))
    throw UnsupportedKernel("Matern derivative kernel needs a+b < 2 nu");
  if (!detail::is_half_integer(nu, 1.5) && !detail::is_half_integer(nu, 2.5))
    throw UnsupportedKernel("Matern derivative kernels need nu in {3/2, 5/2}");
}

/// k^(a,b)(r) as a function of the lag r = x - x'. Does not validate.
template <typename Scalar>
Scalar kernel_at_lag(const KernelSpec<Scalar>& spec, Scalar r) {
  const int n = spec.order();
  // k^(a,b)(r) = (-1)^b d^{a+b}/dr^{a+b} k(r)
  const Scalar sign = (spec.b % 2 == 0) ? Scalar(1) : Scalar(-1);
  const Scalar var = spec.alpha * spec.alpha;
  if (spec.family == KernelFamily::SquaredExponential) {
    using std::exp;
    using std::pow;
    const Scalar u = r / spec.rho;
    // d^n/dr^n exp(-u^2/2) = (-1)^n rho^-n He_n(u) exp(-u^2/2)
    const Scalar dsign = (n % 2 == 0) ? Scalar(1) : Scalar(-1);
    Scalar rho_pow = Scalar(1);
    for (int k = 0; k < n; ++k) rho_pow *= spec.rho;
    return sign * var * dsign * detail::hermite_e(n, u) * exp(-u * u / Scalar(2)) /
           rho_pow;
  }
  return sign * var * detail::matern_radial_derivative(spec.nu, spec.rho, n, r);
}

/// k^(a,b)(x, xp).
template <typename Scalar>
Scalar kernel_eval(const KernelSpec<Scalar>& spec, Arg<Scalar> x, Arg<Scalar> xp) {
  validate(spec);
  if (!std::isfinite(static_cast<double>(x)) || !std::isfinite(static_cast<double>(xp)))
    throw InvalidInput("kernel inputs must be finite");
  return kernel_at_lag(spec, x - xp);
}


/// Matrix of k^(a,b)(xs[i], ys[j]) with no admissibility check; used to
/// materialise off-diagonal blocks and non-PSD "gram" matrices.
template <typename Scalar>
MatrixX<Scalar> cross_kernel_matrix(const KernelSpec<Scalar>& spec,
                                    const Vec<Scalar>& xs,
                                    const Vec<Scalar>& ys) {
  validate(spec);
  MatrixX<Scalar> out(xs.size(), ys.size());
  for (Eigen::Index j = 0; j < ys.size(); ++j)
    for (Eigen::Index i = 0; i < xs.size(); ++i)
      out(i, j) = kernel_at_lag(spec, Scalar(xs(i) - ys(j)));
  if (!out.allFinite()) throw InvalidInput("kernel inputs must be finite");
  return out;
}

/// Symmetric gram matrix of an admissible (PSD) kernel.
template <typename Scalar>
MatrixX<Scalar> gram_matrix(const KernelSpec<Scalar>& spec,
                            const Vec<Scalar>& xs) {
  validate(spec);
  if (!is_psd_derivative(spec.a, spec.b))
    throw NotACovariance("k^(" + std::to_string(spec.a) + "," +
                         std::to_string(spec.b) + ") is not positive semidefinite");
  if (xs.size() < 1) throw InvalidInput("gram_matrix needs at least one input");
  const Eigen::Index n = xs.size();
  MatrixX<Scalar> g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      g(i, j) = kernel_at_lag(spec, Scalar(xs(i) - xs(j)));
      g(j, i) = g(i, j);
    }
  }
  if (!g.allFinite()) throw InvalidInput("kernel inputs must be finite");
  return g;
}

/// Joint covariance of (f(x), f'(x)) under a squared exponential kernel:
///   [[K, C], [C^T, K11]],  C(i,j) = Cov(f(x_i), f'(x_j)) = k^(0,1)(x_i, x_j).
template <typename Scalar>
MatrixX<Scalar> joint_derivative_gram(Scalar alpha, Arg<Scalar> rho,
                                      const Vec<Scalar>& xs) {
  using K = KernelSpec<Scalar>;
  const Eigen::Index n = xs.size();
  if (n < 1) throw InvalidInput("joint_derivative_gram needs at least one input");
  MatrixX<Scalar> out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = gram_matrix(K::squared_exponential(alpha, rho), xs);
  out.bottomRightCorner(n, n) =
      gram_matrix(K::squared_exponential(alpha, rho, 1, 1), xs);
  const MatrixX<Scalar> cross =
      cross_kernel_matrix(K::squared_exponential(alpha, rho, 0, 1), xs, xs);
  out.topRightCorner(n, n) = cross;
  out.bottomLeftCorner(n, n) = cross.transpose();
  return out;
}

struct JitteredCholesky {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

/// Cholesky factor of `k + jitter * I`, starting from 1e-8 * scale and
/// escalating by 10x up to 1e-4 * scale.
inline JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& k,
                                             double scale) {
  const Eigen::Index n = k.rows();
  for (double rel = 1e-8; rel <= 1e-4 * (1 + 1e-9); rel *= 10.0) {
    Eigen::MatrixXd jittered = k;
    jittered.diagonal().array() += rel * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(jittered);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd lower = llt.matrixL();
      if (lower.allFinite()) return {std::move(lower), rel * scale};
    }
  }
  throw NumericallySingular("Cholesky failed for " + std::to_string(n) + "x" +
                            std::to_string(n) + " covariance after jitter escalation");
}

}  // namespace lhsgp
