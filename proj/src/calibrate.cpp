#include "lhsgp/calibrate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <tuple>

#include "lhsgp/diagnostics.hpp"
#include "lhsgp/errors.hpp"
#include "lhsgp/parallel.hpp"
#include "lhsgp/random.hpp"

namespace lhsgp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double rmse(const MatrixXd& draws, const VectorXd& truth) {
  if (draws.rows() == 0 || draws.cols() == 0) throw Undefined("rmse of empty draws");
  if (draws.cols() != truth.size()) throw ShapeError("draws and truth disagree in size");
  const MatrixXd err = draws.rowwise() - truth.transpose();
  return std::sqrt(err.squaredNorm() / static_cast<double>(err.size()));
}

int sbc_rank(double prior_draw, const VectorXd& posterior_draws) {
  return static_cast<int>((posterior_draws.array() < prior_draw).count());
}

VectorXd thin(const VectorXd& draws, int factor) {
  if (factor < 1) throw InvalidInput("thinning factor must be >= 1");
  const Index n = (draws.size() + factor - 1) / factor;
  VectorXd out(n);
  for (Index i = 0; i < n; ++i) out(i) = draws(i * factor);
  return out;
}

namespace {

// Rank-count edges e_1 < ... < e_{K-1} in (0, H+1); the ECDF at edge j counts
// ranks < e_j, which is Binomial(J, e_j / (H+1)) under uniformity.
std::vector<int> gamma_edges(int J, int H) {
  const int K = std::min(H + 1, J);
  std::vector<int> edges;
  for (int j = 1; j < K; ++j) {
    const int e = static_cast<int>(std::lround(static_cast<double>(j) * (H + 1) / K));
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  return edges;
}

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Per edge j and count r: log min(P(X <= r), P(X >= r)) for X ~ Bin(J, z_j).
struct TailTable {
  std::vector<int> edges;
  int J = 0;
  std::vector<double> log_tail;  // edges.size() x (J + 1)

  TailTable(int J_, int H) : edges(gamma_edges(J_, H)), J(J_) {
    log_tail.resize(edges.size() * static_cast<std::size_t>(J + 1));
    std::vector<double> lpmf(J + 1), lcdf(J + 1), lsf(J + 1);
    for (std::size_t j = 0; j < edges.size(); ++j) {
      const double z = static_cast<double>(edges[j]) / (H + 1);
      for (int k = 0; k <= J; ++k)
        lpmf[k] = std::lgamma(J + 1.0) - std::lgamma(k + 1.0) - std::lgamma(J - k + 1.0) +
                  k * std::log(z) + (J - k) * std::log1p(-z);
      double acc = -std::numeric_limits<double>::infinity();
      for (int k = 0; k <= J; ++k) lcdf[k] = acc = log_sum_exp(acc, lpmf[k]);
      acc = -std::numeric_limits<double>::infinity();
      for (int k = J; k >= 0; --k) lsf[k] = acc = log_sum_exp(acc, lpmf[k]);
      for (int k = 0; k <= J; ++k)
        log_tail[j * (J + 1) + k] = std::min(lcdf[k], lsf[k]);
    }
  }

  // counts[r] = number of ranks equal to r
  double log_gamma(const std::vector<int>& counts) const {
    double best = std::numeric_limits<double>::infinity();
    int below = 0;
    int r = 0;
    for (std::size_t j = 0; j < edges.size(); ++j) {
      while (r < edges[j]) below += counts[r++];
      best = std::min(best, log_tail[j * (J + 1) + below]);
    }
    return std::log(2.0) + best;
  }
};

void check_ranks(const std::vector<int>& ranks, int H) {
  if (ranks.size() < 20) throw InvalidInput("gamma test needs J >= 20 ranks");
  if (H < 1) throw InvalidInput("gamma test needs H >= 1");
  for (int r : ranks)
    if (r < 0 || r > H) throw InvalidInput("rank outside [0, H]");
}

std::vector<int> rank_counts(const std::vector<int>& ranks, int H) {
  std::vector<int> counts(H + 1, 0);
  for (int r : ranks) ++counts[r];
  return counts;
}

}  // namespace

int gamma_grid_size(int J, int H) { return static_cast<int>(gamma_edges(J, H).size()); }

double log_gamma_statistic(const std::vector<int>& ranks, int H) {
  check_ranks(ranks, H);
  const TailTable table(static_cast<int>(ranks.size()), H);
  return table.log_gamma(rank_counts(ranks, H));
}

double gamma_statistic(const std::vector<int>& ranks, int H) {
  return std::exp(log_gamma_statistic(ranks, H));
}

double log_gamma_threshold(int J, int H, double coverage) {
  if (J < 20) throw InvalidInput("gamma threshold needs J >= 20");
  if (H < 1) throw InvalidInput("gamma threshold needs H >= 1");
  if (!(coverage > 0.0 && coverage < 1.0)) throw InvalidInput("coverage must be in (0, 1)");
  static std::mutex mutex;
  static std::map<std::tuple<int, int, double>, double> cache;
  const auto key = std::make_tuple(J, H, coverage);
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  constexpr int kReplicates = 50000;
  const TailTable table(J, H);
  std::mt19937_64 rng = make_stream_rng(static_cast<std::uint64_t>(J),
                                        static_cast<std::uint64_t>(H));
  std::uniform_int_distribution<int> unif(0, H);
  std::vector<double> sims(kReplicates);
  std::vector<int> counts(H + 1);
  for (int rep = 0; rep < kReplicates; ++rep) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < J; ++i) ++counts[unif(rng)];
    sims[rep] = table.log_gamma(counts);
  }
  const double value = quantile(std::move(sims), 1.0 - coverage);
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(key, value);
  return value;
}

double gamma_threshold(int J, int H, double coverage) {
  return std::exp(log_gamma_threshold(J, H, coverage));
}

double log_gamma_offset(const std::vector<int>& ranks, int H, double coverage) {
  return log_gamma_statistic(ranks, H) -
         log_gamma_threshold(static_cast<int>(ranks.size()), H, coverage);
}

namespace {

std::string base_name(const std::string& name) { return name.substr(0, name.find('[')); }

std::string index_part(const std::string& name) {
  const auto pos = name.find('[');
  return pos == std::string::npos ? std::string() : name.substr(pos);
}

std::string hyper_class(const std::string& base) {
  if (base == "rho" || base == "rho_f" || base == "rho_g") return "length-scale";
  if (base == "alpha_f" || base == "alpha_g") return "marginal SD";
  if (base == "sigma_f" || base == "sigma_g") return "error SD";
  return {};
}

}  // namespace

std::vector<ClassRmse> hyperparameter_rmse(const PosteriorDraws& draws,
                                           const std::map<std::string, double>& truth) {
  const std::vector<std::string> order = {"length-scale", "marginal SD", "error SD"};
  std::map<std::string, std::pair<double, long long>> sums;
  std::map<std::string, int> counts;
  for (std::size_t col = 0; col < draws.names.size(); ++col) {
    const std::string& name = draws.names[col];
    const std::string base = base_name(name);
    const std::string cls = hyper_class(base);
    if (cls.empty()) continue;
    auto it = truth.find(name);
    if (it == truth.end() && base == "rho") it = truth.find("rho_f" + index_part(name));
    if (it == truth.end() && (base == "rho_f" || base == "rho_g"))
      it = truth.find("rho" + index_part(name));
    if (it == truth.end()) throw NameMismatch("no true value for '" + name + "'");
    const auto c = draws.draws.col(static_cast<Index>(col)).array() - it->second;
    sums[cls].first += c.square().sum();
    sums[cls].second += c.size();
    ++counts[cls];
  }
  std::vector<ClassRmse> out;
  for (const auto& cls : order) {
    auto it = sums.find(cls);
    if (it == sums.end()) continue;
    if (it->second.second == 0) throw Undefined("no draws for " + cls);
    out.push_back({cls, std::sqrt(it->second.first / static_cast<double>(it->second.second)),
                   counts[cls]});
  }
  return out;
}

std::string sbc_class(const std::string& name) {
  const std::string base = base_name(name);
  static const std::vector<std::string> tracked = {
      "x",       "rho",     "rho_f",   "rho_g", "alpha_f", "alpha_g", "sigma_f",
      "sigma_g", "mu_f",    "mu_g",    "C",     "Cf",      "Cg"};
  return std::find(tracked.begin(), tracked.end(), base) != tracked.end() ? base
                                                                          : std::string();
}

bool SbcResult::all_pass() const {
  return std::all_of(classes.begin(), classes.end(),
                     [](const SbcClassResult& c) { return c.pass; });
}

double SbcResult::pass_fraction() const {
  if (classes.empty()) return 0.0;
  const auto n = std::count_if(classes.begin(), classes.end(),
                               [](const SbcClassResult& c) { return c.pass; });
  return static_cast<double>(n) / static_cast<double>(classes.size());
}

SbcResult summarize_ranks(const std::vector<std::string>& names,
                          const Eigen::MatrixXi& ranks, int H, double coverage) {
  if (static_cast<Index>(names.size()) != ranks.cols())
    throw ShapeError("one name per rank column required");
  SbcResult res;
  res.J = static_cast<int>(ranks.rows());
  res.H = H;
  res.coverage = coverage;
  res.names = names;
  res.ranks = ranks;
  res.log_threshold = log_gamma_threshold(res.J, H, coverage);
  std::vector<std::string> class_order;
  std::map<std::string, std::vector<Index>> members;
  for (std::size_t p = 0; p < names.size(); ++p) {
    std::vector<int> r(ranks.col(static_cast<Index>(p)).data(),
                       ranks.col(static_cast<Index>(p)).data() + res.J);
    res.log_gamma.push_back(log_gamma_statistic(r, H));
    std::string cls = sbc_class(names[p]);
    if (cls.empty()) cls = base_name(names[p]);
    if (!members.count(cls)) class_order.push_back(cls);
    members[cls].push_back(static_cast<Index>(p));
  }
  for (const auto& cls : class_order) {
    const auto& idx = members[cls];
    SbcClassResult c;
    c.cls = cls;
    const double adjusted = 1.0 - (1.0 - coverage) / static_cast<double>(idx.size());
    const double log_thr = log_gamma_threshold(res.J, H, adjusted);
    c.min_log_gamma_offset = std::numeric_limits<double>::infinity();
    std::vector<int> pooled;
    for (Index p : idx) {
      c.members.push_back(names[p]);
      c.min_log_gamma_offset = std::min(c.min_log_gamma_offset, res.log_gamma[p] - log_thr);
      for (int j = 0; j < res.J; ++j) pooled.push_back(ranks(j, p));
    }
    c.pooled_log_gamma_offset = log_gamma_offset(pooled, H, coverage);
    c.pass = c.min_log_gamma_offset >= 0.0;
    res.classes.push_back(std::move(c));
  }
  return res;
}

LatentModelSpec spec_for_dataset(const SimDataset& data, ModelVariant variant,
                                 const PriorSet& priors, int M, double c) {
  return make_latent_spec(variant, data.x_tilde, data.y_f, data.y_g, priors, data.s, M, c);
}

SbcResult run_sbc(const SbcConfig& cfg) {
  if (cfg.trials < 20) throw InvalidInput("SBC needs at least 20 trials");
  if (cfg.N < 1 || cfg.D < 1 || cfg.M < 1) throw InvalidInput("N, D and M must be positive");
  if (cfg.thin < 1) throw InvalidInput("thinning factor must be >= 1");
  SamplerConfig base;
  base.iters = cfg.iters;
  base.warmup = cfg.warmup;
  base.chains = 1;
  base.threads = 1;
  base.validate();
  const int retained = cfg.iters - cfg.warmup;
  const int H = (retained + cfg.thin - 1) / cfg.thin;

  struct Trial {
    bool ok = false;
    std::string error;
    std::vector<std::string> names;
    std::vector<int> ranks;
  };
  std::vector<Trial> trials(static_cast<std::size_t>(cfg.trials));
  parallel_for(
      trials.size(),
      [&](std::size_t t) {
        Trial& out = trials[t];
        try {
          std::mt19937_64 rng = make_stream_rng(cfg.seed, t);
          std::uniform_real_distribution<double> unif(cfg.x_lo, cfg.x_hi);
          VectorXd x_tilde(cfg.N);
          for (int i = 0; i < cfg.N; ++i) x_tilde(i) = unif(rng);
          const MatrixXd zeros = MatrixXd::Zero(cfg.N, cfg.D);
          LatentModelSpec spec = make_latent_spec(cfg.variant, x_tilde, zeros, zeros,
                                                  cfg.priors, cfg.s, cfg.M, cfg.c);
          const ParameterVector truth = draw_from_prior(spec, rng);
          auto [y_f, y_g] = simulate_outputs(spec, truth, rng);
          spec.y_f = std::move(y_f);
          spec.y_g = std::move(y_g);
          const LatentModel model(spec);
          const VectorXd true_values = model.constrained_values(model.unconstrain(truth));
          SamplerConfig sc = base;
          sc.seed = rng();
          const PosteriorDraws draws = sample(LatentModelTarget(model), sc);
          if (draws.chains[0].divergence_flag)
            throw Error("more than half of the transitions diverged");
          for (std::size_t p = 0; p < draws.names.size(); ++p) {
            if (sbc_class(draws.names[p]).empty()) continue;
            out.names.push_back(draws.names[p]);
            out.ranks.push_back(sbc_rank(true_values(static_cast<Index>(p)),
                                         thin(draws.draws.col(static_cast<Index>(p)),
                                              cfg.thin)));
          }
          out.ok = true;
        } catch (const std::exception& e) {
          out.error = e.what();
        }
        if (cfg.progress) cfg.progress(static_cast<int>(t), out.ok);
      },
      worker_count(cfg.threads));

  std::vector<int> failed;
  std::vector<std::string> messages;
  std::vector<std::string> names;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    if (!trials[t].ok) {
      failed.push_back(static_cast<int>(t));
      messages.push_back(trials[t].error);
    } else if (names.empty()) {
      names = trials[t].names;
    }
  }
  if (static_cast<double>(failed.size()) > 0.1 * cfg.trials)
    throw Error(std::to_string(failed.size()) + " of " + std::to_string(cfg.trials) +
                " SBC trials failed" + (messages.empty() ? "" : ": " + messages.front()));
  const int ok = cfg.trials - static_cast<int>(failed.size());
  Eigen::MatrixXi ranks(ok, static_cast<Index>(names.size()));
  int row = 0;
  for (const Trial& t : trials) {
    if (!t.ok) continue;
    for (std::size_t p = 0; p < names.size(); ++p) ranks(row, static_cast<Index>(p)) = t.ranks[p];
    ++row;
  }
  SbcResult res = summarize_ranks(names, ranks, H, cfg.coverage);
  res.failed_trials = std::move(failed);
  res.failure_messages = std::move(messages);
  return res;
}

SbcResult run_conjugate_sbc(int J, int H, std::uint64_t seed, int n_obs, double tau,
                            double sigma, double coverage) {
  if (J < 20) throw InvalidInput("SBC needs at least 20 trials");
  Eigen::MatrixXi ranks(J, 1);
  std::normal_distribution<double> z;
  const double post_var = 1.0 / (1.0 / (tau * tau) + n_obs / (sigma * sigma));
  for (int j = 0; j < J; ++j) {
    std::mt19937_64 rng = make_stream_rng(seed, static_cast<std::uint64_t>(j));
    const double theta = tau * z(rng);
    double sum = 0.0;
    for (int i = 0; i < n_obs; ++i) sum += theta + sigma * z(rng);
    const double post_mean = post_var * sum / (sigma * sigma);
    VectorXd post(H);
    for (int h = 0; h < H; ++h) post(h) = post_mean + std::sqrt(post_var) * z(rng);
    ranks(j, 0) = sbc_rank(theta, post);
  }
  return summarize_ranks({"theta"}, ranks, H, coverage);
}

RecoveryTrial run_recovery_trial(const ScenarioConfig& scenario, ModelVariant variant,
                                 const PriorSet& priors, int M,
                                 const SamplerConfig& sampler, double c) {
  RecoveryTrial out;
  out.seed = scenario.seed;
  out.data = generate(scenario);
  const LatentModelSpec spec = spec_for_dataset(out.data, variant, priors, M, c);
  const LatentModel model(spec);
  out.draws = sample(LatentModelTarget(model), sampler);
  const Index n = out.data.N();
  MatrixXd xs(out.draws.draws.rows(), n);
  for (Index i = 0; i < n; ++i) {
    const Index col = out.draws.column("x[" + std::to_string(i + 1) + "]");
    if (col < 0) throw NameMismatch("draws lack x[" + std::to_string(i + 1) + "]");
    xs.col(i) = out.draws.draws.col(col);
  }
  out.rmse_x = rmse(xs, out.data.x_true);
  out.rmse_x_tilde = rmse(out.data.x_tilde.transpose(), out.data.x_true);
  out.hyper = hyperparameter_rmse(out.draws, out.data.truth());
  return out;
}

}  // namespace lhsgp
