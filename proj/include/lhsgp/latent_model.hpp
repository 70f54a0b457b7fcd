#pragma once

// Joint log posterior of multi-output latent-input HSGPs (composite pcHSGP,
// derivative pdHSGP, and their single-block counterparts) over an
// unconstrained parameter vector, with its exact gradient.

#include <Eigen/Core>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lhsgp/hilbert_basis.hpp"

namespace lhsgp {

enum class ModelVariant { pcHSGP, pdHSGP, sHSGP, sdHSGP };

std::string to_string(ModelVariant variant);
/// Accepts "pchsgp", "pcHSGP", ... (case-insensitive).
std::optional<ModelVariant> parse_variant(std::string_view name);

bool has_f_block(ModelVariant v);
bool has_g_block(ModelVariant v);
/// Variants with one length-scale per dimension shared across blocks.
bool ties_length_scale(ModelVariant v);

struct HalfNormalPrior {
  double loc = 0.0;
  double scale = 1.0;
};

struct BlockPriors {
  HalfNormalPrior rho;
  HalfNormalPrior alpha;
  HalfNormalPrior sigma;
};

enum class LatentPriorKind { Gaussian, Uniform };

struct PriorSet {
  BlockPriors f;  // for tied variants the length-scale prior is f.rho
  BlockPriors g;
  HalfNormalPrior mean{0.0, 5.0};
  bool mean_positive = true;  // false: Normal(loc, scale) on an unbounded mean
  double lkj_eta = 1.0;
  LatentPriorKind latent = LatentPriorKind::Gaussian;
  double uniform_lo = 0.0;
  double uniform_hi = 1.0;

  /// Priors matching the partial-composite simulation scenario.
  static PriorSet pcgp_simulation();
  /// Priors matching the derivative simulation scenario (f = y, g = y').
  static PriorSet dgp_simulation();
  /// Priors for standardised gene-expression data with x ~ Uniform(0, 1).
  static PriorSet case_study();
};

struct LatentModelSpec {
  ModelVariant variant = ModelVariant::pcHSGP;
  Basis basis;
  PriorSet priors;
  double s = 0.3;             // measurement SD of x_tilde
  Eigen::VectorXd x_tilde;    // N
  Eigen::MatrixXd y_f;        // N x D, empty for sdHSGP
  Eigen::MatrixXd y_g;        // N x D, empty for sHSGP

  Eigen::Index N() const { return x_tilde.size(); }
  Eigen::Index D() const;
  Eigen::Index M() const { return basis.M; }
};

/// Builds a spec with the basis boundary taken from the x_tilde range.
LatentModelSpec make_latent_spec(ModelVariant variant, Eigen::VectorXd x_tilde,
                                 Eigen::MatrixXd y_f, Eigen::MatrixXd y_g,
                                 PriorSet priors, double s, Eigen::Index M,
                                 double c = 1.25);

/// Throws ShapeError / InvalidInput when the spec is inconsistent.
void validate(const LatentModelSpec& spec);

/// Constrained parameters. Fields not used by a variant stay empty:
///   pcHSGP: rho_f, rho_g, corr_f, corr_g
///   others: rho (shared), corr (shared)
/// sHSGP uses the f block only, sdHSGP the g block only.
struct ParameterVector {
  Eigen::VectorXd x;
  Eigen::VectorXd rho, rho_f, rho_g;
  Eigen::VectorXd alpha_f, alpha_g;
  Eigen::VectorXd sigma_f, sigma_g;
  Eigen::VectorXd mu_f, mu_g;
  Eigen::MatrixXd beta_f, beta_g;        // M x D
  Eigen::MatrixXd corr, corr_f, corr_g;  // lower Cholesky factors A, C = A A^T
};

/// Offsets of each parameter group in the unconstrained vector (-1: absent).
struct ParameterLayout {
  struct Slot {
    Eigen::Index offset = -1;
    Eigen::Index size = 0;
    bool present() const { return offset >= 0; }
  };
  Slot x, rho, rho_f, rho_g, alpha_f, alpha_g, sigma_f, sigma_g, mu_f, mu_g,
      beta_f, beta_g, corr, corr_f, corr_g;
  Eigen::Index size = 0;
};

ParameterLayout make_layout(ModelVariant variant, Eigen::Index N, Eigen::Index D,
                            Eigen::Index M);

/// Per-term breakdown of the log posterior (used for diagnostics and tests).
struct LogPosteriorTerms {
  double latent_prior = 0.0;
  double likelihood_f = 0.0;
  double likelihood_g = 0.0;
  double hyper_prior = 0.0;  // rho/alpha/sigma priors incl. log-Jacobians
  double mean_prior = 0.0;   // incl. log-Jacobian
  double beta_prior = 0.0;
  double corr_prior = 0.0;   // LKJ + CPC log-Jacobian
  double total() const {
    return latent_prior + likelihood_f + likelihood_g + hyper_prior + mean_prior +
           beta_prior + corr_prior;
  }
};

/// The log posterior as a reusable object; all methods are const and
/// reentrant, so one instance can serve several chains concurrently.
class LatentModel {
 public:
  explicit LatentModel(LatentModelSpec spec);

  const LatentModelSpec& spec() const { return spec_; }
  const ParameterLayout& layout() const { return layout_; }
  Eigen::Index size() const { return layout_.size; }

  ParameterVector constrain(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd unconstrain(const ParameterVector& params) const;

  /// Throws NonFiniteDensity naming the offending term.
  double log_posterior(const Eigen::VectorXd& theta) const;
  double log_posterior_gradient(const Eigen::VectorXd& theta,
                                Eigen::VectorXd& grad) const;
  LogPosteriorTerms terms(const Eigen::VectorXd& theta) const;

  /// Non-throwing evaluation for samplers: returns -inf on failure. When
  /// `grad` is non-null it receives the gradient. `clamped` (optional)
  /// receives the number of basis inputs that were clamped.
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad,
                  LogPosteriorTerms* terms = nullptr,
                  Eigen::Index* clamped = nullptr) const;

  /// Canonical names of the constrained parameters, e.g. "x[1]",
  /// "rho_f[2]", "beta_g[3,1]", "Cf[2,1]" (1-based; C lists r > c only).
  std::vector<std::string> parameter_names() const;
  /// Constrained values in the order of parameter_names().
  Eigen::VectorXd constrained_values(const Eigen::VectorXd& theta) const;

  /// Latent x at its prior centre; every other coordinate uniform in
  /// [-jitter, jitter] on the unconstrained scale.
  Eigen::VectorXd initial_point(std::mt19937_64& rng, double jitter) const;

 private:
  LatentModelSpec spec_;
  ParameterLayout layout_;
};

// Free-function surface.
double log_posterior(const LatentModelSpec& spec, const Eigen::VectorXd& theta);
Eigen::VectorXd log_posterior_gradient(const LatentModelSpec& spec,
                                       const Eigen::VectorXd& theta);
ParameterVector constrain(const LatentModelSpec& spec, const Eigen::VectorXd& theta);
Eigen::VectorXd unconstrain(const LatentModelSpec& spec, const ParameterVector& params);

/// Draws every parameter from its prior (x from its measurement prior around
/// x_tilde). Used for simulation-based calibration.
ParameterVector draw_from_prior(const LatentModelSpec& spec, std::mt19937_64& rng);

/// Noise-free outputs (f*, g*) implied by `params`, each N x D (empty when
/// the variant lacks the block).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> latent_functions(
    const LatentModelSpec& spec, const ParameterVector& params);

/// Draws (y_f, y_g) from the model likelihood given `params`.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> simulate_outputs(
    const LatentModelSpec& spec, const ParameterVector& params, std::mt19937_64& rng);

/// log N(y | mu 1, cov).
double gaussian_log_density(const Eigen::MatrixXd& cov, double mu,
                            const Eigen::VectorXd& y);

/// log p(y | x) for one output with the basis weights integrated out:
/// y ~ N(mu, Phi diag(S) Phi^T + sigma^2 I).
double hsgp_log_marginal_likelihood(const Basis& basis,
                                    const SpectralDensity<double>& sd, double mu,
                                    double sigma, const Eigen::VectorXd& xs,
                                    const Eigen::VectorXd& y);

/// Exact counterpart: y ~ N(mu, K + sigma^2 I).
double exact_log_marginal_likelihood(const Kernel& kernel, double mu, double sigma,
                                     const Eigen::VectorXd& xs,
                                     const Eigen::VectorXd& y);

}  // namespace lhsgp
