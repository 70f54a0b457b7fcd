#pragma once

// Ground-truth datasets drawn from exact multi-output GPs: the partial
// composite process (independent f and g blocks) and the joint derivative
// process (g = f').

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace lhsgp {

enum class Process { pcGP, dGP };

std::string to_string(Process p);
std::optional<Process> parse_process(std::string_view name);

struct HalfNormalSpec {
  double loc;
  double scale;
};

/// Sampling distributions of the per-dimension hyperparameters. For dGP the
/// g entries describe the derivative block and rho_f is the shared scale.
struct ScenarioPriors {
  HalfNormalSpec rho_f{1.0, 0.05}, rho_g{0.7, 0.05};
  HalfNormalSpec alpha_f{3.0, 0.25}, alpha_g{2.0, 0.25};
  HalfNormalSpec sigma_f{1.0, 0.25}, sigma_g{0.75, 0.25};
  HalfNormalSpec mean{0.0, 5.0};
  double lkj_eta = 1.0;

  static ScenarioPriors pcgp();
  static ScenarioPriors dgp();
};

struct ScenarioConfig {
  Process process = Process::pcGP;
  int N = 20;
  int D = 5;
  std::uint64_t seed = 0;
  double scale_lambda = 10.0;
  double s = 0.3;
  double x_lo = 0.0;
  double x_hi = 10.0;
  ScenarioPriors priors = ScenarioPriors::pcgp();

  // Test hooks. A fixed value replaces the draw for every dimension (and for
  // dGP applies to the derivative-block alpha/sigma before scaling).
  std::optional<Eigen::VectorXd> x_true;
  std::optional<double> fixed_rho, fixed_alpha, fixed_sigma, fixed_mean;

  /// Config with the scenario's default priors.
  static ScenarioConfig make(Process process, int N, int D, std::uint64_t seed);
  void validate() const;
};

struct SimDataset {
  Process process = Process::pcGP;
  std::uint64_t seed = 0;
  double s = 0.3;
  Eigen::VectorXd x_true;   // sorted
  Eigen::VectorXd x_tilde;
  Eigen::MatrixXd y_f, y_g;  // N x D
  Eigen::MatrixXd f, g;      // noise-free mixed latent functions

  // pcGP: *_f and *_g per block. dGP: rho holds the shared scale; alpha_f,
  // sigma_f are the output-scale values (lambda times alpha_g, sigma_g).
  Eigen::VectorXd rho, rho_f, rho_g;
  Eigen::VectorXd alpha_f, alpha_g, sigma_f, sigma_g, mu_f, mu_g;
  Eigen::MatrixXd C, C_f, C_g;

  Eigen::Index N() const { return x_true.size(); }
  Eigen::Index D() const { return y_f.cols(); }

  /// Named true values using the model parameter names ("x[1]", "rho_f[2]",
  /// "Cf[2,1]", ...).
  std::map<std::string, double> truth() const;
};

/// Throws NumericallySingular if a covariance cannot be factorised.
SimDataset generate(const ScenarioConfig& cfg);

}  // namespace lhsgp
