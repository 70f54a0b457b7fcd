#pragma once

// Multinomial no-U-turn HMC with dual-averaging step size and windowed
// diagonal metric adaptation.

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lhsgp/latent_model.hpp"

namespace lhsgp {

struct SamplerConfig {
  int iters = 2000;  // including warmup
  int warmup = 1000;
  int chains = 1;
  std::uint64_t seed = 0;
  double target_accept = 0.8;
  int max_treedepth = 10;
  double init_jitter = 2.0;
  std::size_t threads = 0;  // 0: worker_count()

  /// Throws InvalidInput.
  void validate() const;
};

/// A differentiable log density on R^n.
class Target {
 public:
  virtual ~Target() = default;
  virtual Eigen::Index dimension() const = 0;
  /// log density and its gradient; -inf (never an exception) on failure.
  virtual double log_density_gradient(const Eigen::VectorXd& q,
                                      Eigen::VectorXd& grad) const = 0;
  virtual Eigen::VectorXd initial_point(std::mt19937_64& rng, double jitter) const;
  /// Names of the reported (constrained) quantities.
  virtual std::vector<std::string> names() const;
  virtual Eigen::VectorXd constrained(const Eigen::VectorXd& q) const { return q; }
};

class LatentModelTarget final : public Target {
 public:
  explicit LatentModelTarget(const LatentModel& model) : model_(model) {}
  Eigen::Index dimension() const override { return model_.size(); }
  double log_density_gradient(const Eigen::VectorXd& q,
                              Eigen::VectorXd& grad) const override;
  Eigen::VectorXd initial_point(std::mt19937_64& rng, double jitter) const override {
    return model_.initial_point(rng, jitter);
  }
  std::vector<std::string> names() const override { return model_.parameter_names(); }
  Eigen::VectorXd constrained(const Eigen::VectorXd& q) const override {
    return model_.constrained_values(q);
  }

 private:
  const LatentModel& model_;
};

/// N(mean, cov), used to validate the sampler against known moments.
class GaussianTarget final : public Target {
 public:
  GaussianTarget(Eigen::VectorXd mean, const Eigen::MatrixXd& cov);
  Eigen::Index dimension() const override { return mean_.size(); }
  double log_density_gradient(const Eigen::VectorXd& q,
                              Eigen::VectorXd& grad) const override;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd precision_;
};

struct ChainStats {
  int chain = 0;
  std::uint64_t seed = 0;
  double step_size = 0.0;
  Eigen::VectorXd inv_metric;
  double mean_accept = 0.0;      // post-warmup
  int divergences = 0;           // post-warmup
  int warmup_divergences = 0;
  std::vector<int> treedepth_histogram;  // index = depth, post-warmup
  long long gradient_evaluations = 0;
  bool divergence_flag = false;  // > 50% of post-warmup transitions diverged
  std::vector<double> log_density;  // per retained draw
  std::vector<double> accept_stat;
  std::vector<int> treedepth;
  std::vector<char> divergent;
};

struct PosteriorDraws {
  Eigen::MatrixXd draws;  // rows: chain-major retained draws; cols: names
  std::vector<std::string> names;
  std::vector<ChainStats> chains;
  Eigen::Index draws_per_chain = 0;

  Eigen::Index column(const std::string& name) const;  // -1 if absent
  /// draws_per_chain x chains matrix for one column.
  Eigen::MatrixXd by_chain(Eigen::Index col) const;
  int total_divergences() const;
};

/// Runs cfg.chains chains; chain c uses the RNG stream (cfg.seed, c), so the
/// result does not depend on thread scheduling.
PosteriorDraws sample(const Target& target, const SamplerConfig& cfg);
PosteriorDraws sample(const LatentModelSpec& spec, const SamplerConfig& cfg);

/// One chain; exposed for tests and for callers that manage their own pool.
ChainStats run_chain(const Target& target, const SamplerConfig& cfg, int chain,
                     Eigen::MatrixXd& constrained_draws);

}  // namespace lhsgp
