#include "lhsgp/simgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "lhsgp/correlation.hpp"
#include "lhsgp/errors.hpp"
#include "lhsgp/kernels.hpp"
#include "lhsgp/random.hpp"

namespace lhsgp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Process p) { return p == Process::pcGP ? "pcgp" : "dgp"; }

std::optional<Process> parse_process(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "pcgp") return Process::pcGP;
  if (lower == "dgp") return Process::dGP;
  return std::nullopt;
}

ScenarioPriors ScenarioPriors::pcgp() { return {}; }

ScenarioPriors ScenarioPriors::dgp() {
  ScenarioPriors p;
  p.rho_f = {1.0, 0.05};
  p.rho_g = p.rho_f;
  p.alpha_g = {3.0, 0.25};
  p.sigma_g = {1.0, 0.25};
  // output-block values are lambda times the derivative-block draws
  p.alpha_f = p.alpha_g;
  p.sigma_f = p.sigma_g;
  return p;
}

ScenarioConfig ScenarioConfig::make(Process process, int N, int D, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.process = process;
  cfg.N = N;
  cfg.D = D;
  cfg.seed = seed;
  cfg.priors = process == Process::pcGP ? ScenarioPriors::pcgp() : ScenarioPriors::dgp();
  return cfg;
}

void ScenarioConfig::validate() const {
  if (N < 2) throw InvalidInput("N must be at least 2");
  if (D < 1) throw InvalidInput("D must be at least 1");
  if (!(scale_lambda > 0.0) || !std::isfinite(scale_lambda))
    throw InvalidInput("scale_lambda must be positive");
  if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidInput("s must be non-negative");
  if (!(x_lo < x_hi)) throw InvalidInput("x range is empty");
  if (x_true && x_true->size() != N) throw ShapeError("x_true override must have N entries");
  if (fixed_rho && !(*fixed_rho > 0.0)) throw InvalidInput("fixed rho must be positive");
  if (fixed_alpha && !(*fixed_alpha >= 0.0)) throw InvalidInput("fixed alpha must be >= 0");
  if (fixed_sigma && !(*fixed_sigma >= 0.0)) throw InvalidInput("fixed sigma must be >= 0");
  if (!(priors.lkj_eta > 0.0)) throw InvalidInput("lkj_eta must be positive");
}

namespace {

VectorXd draw_family(const HalfNormalSpec& prior, const std::optional<double>& fixed,
                     int D, std::mt19937_64& rng) {
  VectorXd v(D);
  for (int d = 0; d < D; ++d)
    v(d) = fixed ? *fixed : sample_half_normal(prior.loc, prior.scale, rng);
  return v;
}

VectorXd std_normal(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

VectorXd draw_exact(const MatrixXd& cov, std::mt19937_64& rng) {
  const double scale = std::max(cov.diagonal().maxCoeff(), 1e-300);
  return cholesky_with_jitter(cov, scale).lower * std_normal(cov.rows(), rng);
}

MatrixXd add_noise(const MatrixXd& f, const VectorXd& sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  MatrixXd y = f;
  for (Index d = 0; d < y.cols(); ++d)
    for (Index i = 0; i < y.rows(); ++i) y(i, d) += sigma(d) * z(rng);
  return y;
}

void put_vector(std::map<std::string, double>& out, const std::string& name,
                const VectorXd& v) {
  for (Index d = 0; d < v.size(); ++d)
    out[name + "[" + std::to_string(d + 1) + "]"] = v(d);
}

void put_corr(std::map<std::string, double>& out, const std::string& name,
              const MatrixXd& c) {
  for (Index r = 1; r < c.rows(); ++r)
    for (Index k = 0; k < r; ++k)
      out[name + "[" + std::to_string(r + 1) + "," + std::to_string(k + 1) + "]"] =
          c(r, k);
}

}  // namespace

std::map<std::string, double> SimDataset::truth() const {
  std::map<std::string, double> out;
  put_vector(out, "x", x_true);
  if (process == Process::pcGP) {
    put_vector(out, "rho_f", rho_f);
    put_vector(out, "rho_g", rho_g);
  } else {
    put_vector(out, "rho", rho);
  }
  put_vector(out, "alpha_f", alpha_f);
  put_vector(out, "alpha_g", alpha_g);
  put_vector(out, "sigma_f", sigma_f);
  put_vector(out, "sigma_g", sigma_g);
  put_vector(out, "mu_f", mu_f);
  put_vector(out, "mu_g", mu_g);
  if (process == Process::pcGP) {
    put_corr(out, "Cf", C_f);
    put_corr(out, "Cg", C_g);
  } else {
    put_corr(out, "C", C);
  }
  return out;
}

SimDataset generate(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng = make_stream_rng(cfg.seed, 0);
  const int N = cfg.N;
  const int D = cfg.D;
  const ScenarioPriors& pr = cfg.priors;

  SimDataset ds;
  ds.process = cfg.process;
  ds.seed = cfg.seed;
  ds.s = cfg.s;

  if (cfg.x_true) {
    ds.x_true = *cfg.x_true;
  } else {
    std::uniform_real_distribution<double> unif(cfg.x_lo, cfg.x_hi);
    ds.x_true.resize(N);
    for (int i = 0; i < N; ++i) ds.x_true(i) = unif(rng);
  }
  std::sort(ds.x_true.begin(), ds.x_true.end());

  MatrixXd u_f(N, D), u_g(N, D);
  if (cfg.process == Process::pcGP) {
    ds.rho_f = draw_family(pr.rho_f, cfg.fixed_rho, D, rng);
    ds.rho_g = draw_family(pr.rho_g, cfg.fixed_rho, D, rng);
    ds.alpha_f = draw_family(pr.alpha_f, cfg.fixed_alpha, D, rng);
    ds.alpha_g = draw_family(pr.alpha_g, cfg.fixed_alpha, D, rng);
    ds.sigma_f = draw_family(pr.sigma_f, cfg.fixed_sigma, D, rng);
    ds.sigma_g = draw_family(pr.sigma_g, cfg.fixed_sigma, D, rng);
    ds.mu_f = draw_family(pr.mean, cfg.fixed_mean, D, rng);
    ds.mu_g = draw_family(pr.mean, cfg.fixed_mean, D, rng);
    ds.C_f = sample_lkj(D, pr.lkj_eta, rng);
    ds.C_g = sample_lkj(D, pr.lkj_eta, rng);
    for (int d = 0; d < D; ++d) {
      using K = KernelSpec<double>;
      u_f.col(d) = draw_exact(
          gram_matrix(K::squared_exponential(ds.alpha_f(d), ds.rho_f(d)), ds.x_true), rng);
      u_g.col(d) = draw_exact(
          gram_matrix(K::squared_exponential(ds.alpha_g(d), ds.rho_g(d)), ds.x_true), rng);
      u_f.col(d).array() += ds.mu_f(d);
      u_g.col(d).array() += ds.mu_g(d);
    }
    const MatrixXd a_f = ds.C_f.llt().matrixL();
    const MatrixXd a_g = ds.C_g.llt().matrixL();
    ds.f = u_f * a_f.transpose();
    ds.g = u_g * a_g.transpose();
  } else {
    ds.rho = draw_family(pr.rho_f, cfg.fixed_rho, D, rng);
    ds.alpha_g = draw_family(pr.alpha_g, cfg.fixed_alpha, D, rng);
    ds.sigma_g = draw_family(pr.sigma_g, cfg.fixed_sigma, D, rng);
    ds.alpha_f = cfg.scale_lambda * ds.alpha_g;
    ds.sigma_f = cfg.scale_lambda * ds.sigma_g;
    ds.mu_f = draw_family(pr.mean, cfg.fixed_mean, D, rng);
    ds.mu_g = draw_family(pr.mean, cfg.fixed_mean, D, rng);
    ds.C = sample_lkj(D, pr.lkj_eta, rng);
    // Joint draw of (h, h') with alpha_g, then f = lambda h: Cov(f, g) carries
    // alpha_f alpha_g and g stays proportional to f'.
    for (int d = 0; d < D; ++d) {
      const VectorXd joint =
          draw_exact(joint_derivative_gram(ds.alpha_g(d), ds.rho(d), ds.x_true), rng);
      u_f.col(d) = cfg.scale_lambda * joint.head(N);
      u_g.col(d) = joint.tail(N);
      u_f.col(d).array() += ds.mu_f(d);
      u_g.col(d).array() += ds.mu_g(d);
    }
    const MatrixXd a = ds.C.llt().matrixL();
    ds.f = u_f * a.transpose();
    ds.g = u_g * a.transpose();
  }

  ds.y_f = add_noise(ds.f, ds.sigma_f, rng);
  ds.y_g = add_noise(ds.g, ds.sigma_g, rng);
  std::normal_distribution<double> z;
  ds.x_tilde.resize(N);
  for (int i = 0; i < N; ++i) ds.x_tilde(i) = ds.x_true(i) + cfg.s * z(rng);
  return ds;
}

}  // namespace lhsgp
