#include "lhsgp/sampler.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "lhsgp/errors.hpp"
#include "lhsgp/parallel.hpp"
#include "lhsgp/random.hpp"

namespace lhsgp {
namespace {

using Eigen::Index;
using Eigen::VectorXd;

constexpr double kMaxDeltaH = 1000.0;
constexpr int kInitAttempts = 100;

double log_sum_exp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct PhasePoint {
  VectorXd q, p, grad;
  double lp = -INFINITY;
};

// Welford accumulator for the windowed variance estimate.
class VarianceEstimator {
 public:
  explicit VarianceEstimator(Index n) : mean_(VectorXd::Zero(n)), m2_(VectorXd::Zero(n)) {}
  void add(const VectorXd& q) {
    ++count_;
    const VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta.cwiseProduct(q - mean_);
  }
  long count() const { return count_; }
  VectorXd variance() const { return m2_ / static_cast<double>(count_ - 1); }
  void restart() {
    count_ = 0;
    mean_.setZero();
    m2_.setZero();
  }

 private:
  long count_ = 0;
  VectorXd mean_, m2_;
};

// Windowed metric schedule: an initial fast phase, doubling slow windows and
// a terminal fast phase.
class WindowSchedule {
 public:
  WindowSchedule(int warmup, Index dim) : warmup_(warmup), estimator_(dim) {
    if (warmup < 20) {
      active_ = false;
      return;
    }
    init_buffer_ = static_cast<int>(0.15 * warmup);
    term_buffer_ = static_cast<int>(0.10 * warmup);
    window_size_ = std::min(25, warmup - init_buffer_ - term_buffer_);
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  /// Feeds the state after warmup iteration `counter_`; true when a window
  /// closed and `inv_metric` was updated.
  bool learn(VectorXd& inv_metric, const VectorXd& q) {
    if (!active_) {
      ++counter_;
      return false;
    }
    if (in_window()) estimator_.add(q);
    if (window_end()) {
      compute_next_window();
      const double n = static_cast<double>(estimator_.count());
      inv_metric = (n / (n + 5.0)) * estimator_.variance().array() + 1e-3 * (5.0 / (n + 5.0));
      estimator_.restart();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_;
  }
  bool window_end() const { return counter_ == next_window_ && counter_ != warmup_; }
  void compute_next_window() {
    const int last = warmup_ - term_buffer_ - 1;
    if (next_window_ == last) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != last && next_window_ + 2 * window_size_ >= warmup_ - term_buffer_)
      next_window_ = last;
  }

  int warmup_;
  bool active_ = true;
  int init_buffer_ = 0, term_buffer_ = 0, window_size_ = 0, next_window_ = 0;
  int counter_ = 0;
  VarianceEstimator estimator_;
};

class DualAveraging {
 public:
  DualAveraging(double delta) : delta_(delta) {}
  void restart(double step) {
    mu_ = std::log(10.0 * step);
    counter_ = 0;
    s_bar_ = x_bar_ = 0.0;
  }
  double learn(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double c = static_cast<double>(counter_);
    const double eta = 1.0 / (c + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(c) / kGamma;
    const double x_eta = std::pow(c, -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05, kT0 = 10.0, kKappa = 0.75;
  double delta_;
  double mu_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0;
  long counter_ = 0;
};

class Nuts {
 public:
  Nuts(const Target& target, std::mt19937_64& rng, int max_depth)
      : target_(target), rng_(rng), max_depth_(max_depth),
        inv_metric_(VectorXd::Ones(target.dimension())) {}

  double step = 1.0;
  VectorXd& inv_metric() { return inv_metric_; }
  long long gradient_evaluations = 0;

  void evaluate(PhasePoint& z) {
    ++gradient_evaluations;
    z.lp = target_.log_density_gradient(z.q, z.grad);
    if (!std::isfinite(z.lp) || !z.grad.allFinite()) z.lp = -INFINITY;
  }

  struct Transition {
    double accept_stat = 0.0;
    int depth = 0;
    bool divergent = false;
  };

  void init_step_size(PhasePoint& z) {
    const PhasePoint init = z;
    sample_momentum(z);
    double h0 = hamiltonian(z);
    leapfrog(z, step);
    double delta = h0 - hamiltonian(z);
    if (std::isnan(delta)) delta = -INFINITY;
    const int direction = delta > std::log(0.8) ? 1 : -1;
    while (true) {
      z = init;
      sample_momentum(z);
      h0 = hamiltonian(z);
      leapfrog(z, step);
      delta = h0 - hamiltonian(z);
      if (std::isnan(delta)) delta = -INFINITY;
      if (direction == 1 && !(delta > std::log(0.8))) break;
      if (direction == -1 && !(delta < std::log(0.8))) break;
      step = direction == 1 ? 2.0 * step : 0.5 * step;
      if (step > 1e7) throw InitializationFailed("step size diverged during initialisation");
      if (step == 0.0) throw InitializationFailed("step size collapsed to zero");
    }
    z = init;
  }

  Transition transition(PhasePoint& z) {
    sample_momentum(z);
    PhasePoint z_fwd = z, z_bck = z, z_sample = z, z_propose = z;
    const VectorXd p0 = z.p, p_sharp0 = inv_metric_.cwiseProduct(z.p);
    VectorXd p_fwd_fwd = p0, p_fwd_bck = p0, p_bck_fwd = p0, p_bck_bck = p0;
    VectorXd p_sharp_fwd_fwd = p_sharp0, p_sharp_fwd_bck = p_sharp0,
             p_sharp_bck_fwd = p_sharp0, p_sharp_bck_bck = p_sharp0;
    VectorXd rho = p0;
    double log_sum_weight = 0.0;
    h0_ = hamiltonian(z);
    n_leapfrog_ = 0;
    sum_metro_prob_ = 0.0;
    divergent_ = false;
    int depth = 0;
    const Index n = z.q.size();

    while (depth < max_depth_) {
      VectorXd rho_fwd = VectorXd::Zero(n), rho_bck = VectorXd::Zero(n);
      bool valid = false;
      double log_sum_weight_subtree = -INFINITY;
      if (uniform_(rng_) > 0.5) {
        z = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth, z, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd,
                           p_fwd_bck, p_fwd_fwd, 1.0, log_sum_weight_subtree);
        z_fwd = z;
      } else {
        z = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth, z, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck,
                           p_bck_fwd, p_bck_bck, -1.0, log_sum_weight_subtree);
        z_bck = z;
      }
      if (!valid) break;
      ++depth;
      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform_(rng_) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      VectorXd rho_extended = rho_bck + p_fwd_bck;
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_extended);
      rho_extended = rho_fwd + p_bck_fwd;
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_extended);
      if (!persist) break;
    }
    z = z_sample;
    Transition t;
    t.accept_stat = n_leapfrog_ > 0 ? sum_metro_prob_ / n_leapfrog_ : 0.0;
    t.depth = depth;
    t.divergent = divergent_;
    return t;
  }

 private:
  static bool criterion(const VectorXd& p_sharp_minus, const VectorXd& p_sharp_plus,
                        const VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
  }

  void sample_momentum(PhasePoint& z) {
    z.p.resize(z.q.size());
    for (Index i = 0; i < z.p.size(); ++i) z.p(i) = normal_(rng_) / std::sqrt(inv_metric_(i));
  }

  double hamiltonian(const PhasePoint& z) const {
    const double h = -z.lp + 0.5 * z.p.cwiseProduct(inv_metric_).dot(z.p);
    return std::isnan(h) ? INFINITY : h;
  }

  void leapfrog(PhasePoint& z, double eps) {
    z.p += 0.5 * eps * z.grad;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    evaluate(z);
    if (z.lp == -INFINITY) return;
    z.p += 0.5 * eps * z.grad;
  }

  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, VectorXd& p_sharp_beg,
                  VectorXd& p_sharp_end, VectorXd& rho, VectorXd& p_beg, VectorXd& p_end,
                  double sign, double& log_sum_weight) {
    if (depth == 0) {
      leapfrog(z, sign * step);
      ++n_leapfrog_;
      const double h = hamiltonian(z);
      if (h - h0_ > kMaxDeltaH) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0_ - h);
      sum_metro_prob_ += h0_ - h > 0 ? 1.0 : std::exp(h0_ - h);
      z_propose = z;
      p_sharp_beg = inv_metric_.cwiseProduct(z.p);
      p_sharp_end = p_sharp_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return !divergent_;
    }
    const Index n = z.q.size();
    VectorXd p_sharp_init_end(n), p_init_end(n), rho_init = VectorXd::Zero(n);
    double log_sum_weight_init = -INFINITY;
    if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg,
                    p_init_end, sign, log_sum_weight_init))
      return false;
    PhasePoint z_propose_final = z;
    VectorXd p_sharp_final_beg(n), p_final_beg(n), rho_final = VectorXd::Zero(n);
    double log_sum_weight_final = -INFINITY;
    if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final,
                    p_final_beg, p_end, sign, log_sum_weight_final))
      return false;
    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (uniform_(rng_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }
    const VectorXd rho_subtree = rho_init + rho_final;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    VectorXd rho_extended = rho_init + p_final_beg;
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_extended);
    rho_extended = rho_final + p_init_end;
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_extended);
    rho += rho_subtree;
    return persist;
  }

  const Target& target_;
  std::mt19937_64& rng_;
  int max_depth_;
  VectorXd inv_metric_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  double h0_ = 0.0;
  int n_leapfrog_ = 0;
  double sum_metro_prob_ = 0.0;
  bool divergent_ = false;
};

}  // namespace

void SamplerConfig::validate() const {
  if (chains < 1) throw InvalidInput("chains must be >= 1");
  if (warmup < 0 || iters <= warmup) throw InvalidInput("need 0 <= warmup < iters");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw InvalidInput("target_accept must lie in (0, 1)");
  if (max_treedepth < 1) throw InvalidInput("max_treedepth must be >= 1");
  if (!(init_jitter >= 0.0)) throw InvalidInput("init_jitter must be >= 0");
}

VectorXd Target::initial_point(std::mt19937_64& rng, double jitter) const {
  std::uniform_real_distribution<double> u(-jitter, jitter);
  VectorXd q(dimension());
  for (auto& v : q) v = u(rng);
  return q;
}

std::vector<std::string> Target::names() const {
  std::vector<std::string> out;
  for (Index i = 0; i < dimension(); ++i) out.push_back("q[" + std::to_string(i + 1) + "]");
  return out;
}

double LatentModelTarget::log_density_gradient(const VectorXd& q, VectorXd& grad) const {
  try {
    return model_.evaluate(q, &grad);
  } catch (const std::exception&) {
    grad.setZero(q.size());
    return -INFINITY;
  }
}

GaussianTarget::GaussianTarget(VectorXd mean, const Eigen::MatrixXd& cov)
    : mean_(std::move(mean)) {
  if (cov.rows() != mean_.size() || cov.cols() != mean_.size())
    throw ShapeError("covariance does not match the mean");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NotACovariance("covariance is not positive definite");
  precision_ = llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
}

double GaussianTarget::log_density_gradient(const VectorXd& q, VectorXd& grad) const {
  const VectorXd r = q - mean_;
  grad = -precision_ * r;
  return 0.5 * r.dot(grad);
}

Index PosteriorDraws::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<Index>(i);
  return -1;
}

Eigen::MatrixXd PosteriorDraws::by_chain(Index col) const {
  const Index chains_n = draws_per_chain > 0 ? draws.rows() / draws_per_chain : 0;
  Eigen::MatrixXd out(draws_per_chain, chains_n);
  for (Index c = 0; c < chains_n; ++c)
    out.col(c) = draws.col(col).segment(c * draws_per_chain, draws_per_chain);
  return out;
}

int PosteriorDraws::total_divergences() const {
  int total = 0;
  for (const ChainStats& c : chains) total += c.divergences;
  return total;
}

ChainStats run_chain(const Target& target, const SamplerConfig& cfg, int chain,
                     Eigen::MatrixXd& constrained_draws) {
  cfg.validate();
  ChainStats stats;
  stats.chain = chain;
  stats.seed = cfg.seed;
  std::mt19937_64 rng = make_stream_rng(cfg.seed, static_cast<std::uint64_t>(chain));
  Nuts nuts(target, rng, cfg.max_treedepth);

  PhasePoint z;
  bool ok = false;
  for (int attempt = 0; attempt < kInitAttempts && !ok; ++attempt) {
    z.q = target.initial_point(rng, cfg.init_jitter);
    nuts.evaluate(z);
    ok = std::isfinite(z.lp);
  }
  if (!ok)
    throw InitializationFailed("no finite log density after " +
                               std::to_string(kInitAttempts) + " initialisation attempts");

  nuts.init_step_size(z);
  DualAveraging adapt(cfg.target_accept);
  adapt.restart(nuts.step);
  WindowSchedule windows(cfg.warmup, target.dimension());

  const int retained = cfg.iters - cfg.warmup;
  stats.treedepth_histogram.assign(static_cast<std::size_t>(cfg.max_treedepth + 1), 0);
  double accept_sum = 0.0;
  for (int it = 0; it < cfg.iters; ++it) {
    const bool warm = it < cfg.warmup;
    const Nuts::Transition t = nuts.transition(z);
    if (warm) {
      stats.warmup_divergences += t.divergent ? 1 : 0;
      nuts.step = adapt.learn(t.accept_stat);
      if (windows.learn(nuts.inv_metric(), z.q)) {
        nuts.init_step_size(z);
        adapt.restart(nuts.step);
      }
      if (it == cfg.warmup - 1) nuts.step = adapt.final_step();
      continue;
    }
    if (it == cfg.warmup && constrained_draws.rows() != retained) {
      const VectorXd first = target.constrained(z.q);
      constrained_draws.resize(retained, first.size());
    }
    const int row = it - cfg.warmup;
    constrained_draws.row(row) = target.constrained(z.q).transpose();
    stats.divergences += t.divergent ? 1 : 0;
    accept_sum += t.accept_stat;
    ++stats.treedepth_histogram[static_cast<std::size_t>(t.depth)];
    stats.log_density.push_back(z.lp);
    stats.accept_stat.push_back(t.accept_stat);
    stats.treedepth.push_back(t.depth);
    stats.divergent.push_back(t.divergent ? 1 : 0);
  }
  stats.step_size = nuts.step;
  stats.inv_metric = nuts.inv_metric();
  stats.mean_accept = accept_sum / retained;
  stats.divergence_flag = stats.divergences * 2 > retained;
  stats.gradient_evaluations = nuts.gradient_evaluations;
  return stats;
}

PosteriorDraws sample(const Target& target, const SamplerConfig& cfg) {
  cfg.validate();
  const int retained = cfg.iters - cfg.warmup;
  std::vector<Eigen::MatrixXd> per_chain(static_cast<std::size_t>(cfg.chains));
  std::vector<ChainStats> stats(static_cast<std::size_t>(cfg.chains));
  parallel_for(
      static_cast<std::size_t>(cfg.chains),
      [&](std::size_t c) {
        stats[c] = run_chain(target, cfg, static_cast<int>(c), per_chain[c]);
      },
      worker_count(cfg.threads));
  PosteriorDraws out;
  out.names = target.names();
  out.draws_per_chain = retained;
  out.draws.resize(static_cast<Index>(retained) * cfg.chains,
                   static_cast<Index>(out.names.size()));
  for (int c = 0; c < cfg.chains; ++c) {
    if (per_chain[c].cols() != out.draws.cols())
      throw ShapeError("target names do not match its constrained values");
    out.draws.middleRows(static_cast<Index>(c) * retained, retained) = per_chain[c];
  }
  out.chains = std::move(stats);
  return out;
}

PosteriorDraws sample(const LatentModelSpec& spec, const SamplerConfig& cfg) {
  const LatentModel model(spec);
  return sample(LatentModelTarget(model), cfg);
}

}  // namespace lhsgp
