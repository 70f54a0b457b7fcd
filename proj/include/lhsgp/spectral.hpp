#pragma once

// Spectral densities S(w) = int exp(-i w r) k(r) dr of the base kernels and
// of the admissible derivative kernels, S^(a,b)(w) = (iw)^a (-iw)^b S(w).

#include <cmath>
#include <numbers>
#include <string>

#include "lhsgp/kernels.hpp"

namespace lhsgp {

template <typename Scalar = double>
struct SpectralDensity {
  KernelSpec<Scalar> base;
  int a = 0;
  int b = 0;

  static SpectralDensity of(const KernelSpec<Scalar>& kernel) {
    return {kernel.base(), kernel.a, kernel.b};
  }
  static SpectralDensity squared_exponential(Scalar alpha, Scalar rho, int a = 0,
                                             int b = 0) {
    return {KernelSpec<Scalar>::squared_exponential(alpha, rho), a, b};
  }
};

template <typename Scalar>
void validate(const SpectralDensity<Scalar>& sd) {
  if (!is_psd_derivative(sd.a, sd.b))
    throw NotADensity("(" + std::to_string(sd.a) + "," + std::to_string(sd.b) +
                      ") has no non-negative spectral density");
  KernelSpec<Scalar> k = sd.base;
  k.a = sd.a;
  k.b = sd.b;
  if (k.family == KernelFamily::Matern &&
      !(static_cast<double>(k.order()) < 2.0 * static_cast<double>(k.nu)))
    throw NotADensity("Matern spectral moment of order a+b >= 2 nu diverges");
  validate(k.base());
  if (k.family == KernelFamily::SquaredExponential &&
      k.order() > kMaxSquaredExponentialOrder)
    throw UnsupportedKernel("derivative order too high");
}

/// Base-kernel density, no admissibility check.
template <typename Scalar>
Scalar base_spectral_density(const KernelSpec<Scalar>& k, Arg<Scalar> omega) {
  using std::exp;
  using std::pow;
  using std::sqrt;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar var = k.alpha * k.alpha;
  if (k.family == KernelFamily::SquaredExponential) {
    return sqrt(Scalar(2) * pi) * var * k.rho *
           exp(-k.rho * k.rho * omega * omega / Scalar(2));
  }
  const Scalar nu = k.nu;
  const Scalar two_nu = Scalar(2) * nu;
  const Scalar norm = Scalar(2) * sqrt(pi) * std::tgamma(nu + Scalar(0.5)) *
                      pow(two_nu, nu) * pow(k.rho, -two_nu) / std::tgamma(nu);
  return var * norm *
         pow(two_nu / (k.rho * k.rho) + omega * omega, -(nu + Scalar(0.5)));
}

/// Spectral density value at angular frequency omega (radians per input unit).
template <typename Scalar>
Scalar spectral_eval(const SpectralDensity<Scalar>& sd, Arg<Scalar> omega) {
  validate(sd);
  Scalar w_pow = Scalar(1);
  for (int k = 0; k < sd.a + sd.b; ++k) w_pow *= omega;
  // admissibility fixes (i)^(a+3b) = +1
  return w_pow * base_spectral_density(sd.base, omega);
}

}  // namespace lhsgp
