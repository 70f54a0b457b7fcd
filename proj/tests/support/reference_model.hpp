#pragma once

// Loop-based log posterior assembled term by term from scalar densities,
// used to cross-check the vectorised model and its gradient.

#include <cmath>
#include <numbers>

#include "lhsgp/correlation.hpp"
#include "lhsgp/latent_model.hpp"
#include "lhsgp/random.hpp"

namespace lhsgp::testing {

inline double normal_logpdf(double v, double mean, double sd) {
  const double z = (v - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2 * std::numbers::pi);
}

struct RefBlock {
  bool derivative;
  Eigen::VectorXd rho, alpha, sigma, mu;
  Eigen::MatrixXd beta, lower;
  const Eigen::MatrixXd* y;
};

inline double block_loglik(const Basis& basis, const Eigen::VectorXd& x, const RefBlock& b) {
  const Eigen::Index n = x.size(), d = b.rho.size();
  Eigen::MatrixXd u(n, d);
  for (Eigen::Index c = 0; c < d; ++c) {
    const int o = b.derivative ? 1 : 0;
    const auto sd = SpectralDensity<double>::squared_exponential(b.alpha(c), b.rho(c), o, o);
    u.col(c) = gp_linear_predict(basis, sd, b.mu(c), Eigen::VectorXd(b.beta.col(c)), x);
  }
  double out = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < d; ++r) {
      double f = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) f += b.lower(r, c) * u(i, c);
      out += normal_logpdf((*b.y)(i, r), f, b.sigma(r));
    }
  }
  return out;
}

inline double positive_prior(const Eigen::VectorXd& v, const HalfNormalPrior& p) {
  double out = 0.0;
  for (double e : v) out += half_normal_log_density(e, p.loc, p.scale) + std::log(e);
  return out;
}

inline double corr_prior(const Eigen::MatrixXd& lower, double eta) {
  const CorrCholesky cc = corr_cholesky_constrain(corr_cholesky_unconstrain(lower), lower.rows());
  return lkj_cholesky_log_density(lower, eta) + cc.log_jacobian;
}

// Log posterior on the unconstrained scale, computed from constrained
// parameters plus the log-Jacobian of each transform.
inline double reference_log_posterior(const LatentModelSpec& spec, const ParameterVector& p) {
  const PriorSet& pri = spec.priors;
  double lp = 0.0;
  for (Eigen::Index i = 0; i < spec.N(); ++i) {
    lp += normal_logpdf(spec.x_tilde(i), p.x(i), spec.s);
    if (pri.latent == LatentPriorKind::Uniform) {
      const double q = (p.x(i) - pri.uniform_lo) / (pri.uniform_hi - pri.uniform_lo);
      lp += std::log(q) + std::log(1 - q);
    }
  }
  lp += positive_prior(p.rho, pri.f.rho) + positive_prior(p.rho_f, pri.f.rho) +
        positive_prior(p.rho_g, pri.g.rho) + positive_prior(p.alpha_f, pri.f.alpha) +
        positive_prior(p.alpha_g, pri.g.alpha) + positive_prior(p.sigma_f, pri.f.sigma) +
        positive_prior(p.sigma_g, pri.g.sigma);
  for (const Eigen::VectorXd* mu : {&p.mu_f, &p.mu_g}) {
    if (pri.mean_positive)
      lp += positive_prior(*mu, pri.mean);
    else
      for (double v : *mu) lp += normal_logpdf(v, pri.mean.loc, pri.mean.scale);
  }
  for (const Eigen::MatrixXd* b : {&p.beta_f, &p.beta_g})
    for (Eigen::Index k = 0; k < b->size(); ++k) lp += normal_logpdf(b->data()[k], 0.0, 1.0);
  for (const Eigen::MatrixXd* a : {&p.corr, &p.corr_f, &p.corr_g})
    if (a->size()) lp += corr_prior(*a, pri.lkj_eta);

  const Eigen::VectorXd& rho_f = p.rho_f.size() ? p.rho_f : p.rho;
  const Eigen::VectorXd& rho_g = p.rho_g.size() ? p.rho_g : p.rho;
  const Eigen::MatrixXd& a_f = p.corr_f.size() ? p.corr_f : p.corr;
  const Eigen::MatrixXd& a_g = p.corr_g.size() ? p.corr_g : p.corr;
  const bool g_derivative = spec.variant == ModelVariant::pdHSGP ||
                            spec.variant == ModelVariant::sdHSGP;
  if (has_f_block(spec.variant))
    lp += block_loglik(spec.basis, p.x,
                       {false, rho_f, p.alpha_f, p.sigma_f, p.mu_f, p.beta_f, a_f, &spec.y_f});
  if (has_g_block(spec.variant))
    lp += block_loglik(spec.basis, p.x,
                       {g_derivative, rho_g, p.alpha_g, p.sigma_g, p.mu_g, p.beta_g, a_g,
                        &spec.y_g});
  return lp;
}

}  // namespace lhsgp::testing
