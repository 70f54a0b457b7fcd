#include "lhsgp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lhsgp/random.hpp"
#include "lhsgp/sampler.hpp"

namespace lhsgp {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;

constexpr Index kMinHalf = 4;

bool usable(const MatrixXd& chains) {
  if (!chains.allFinite() || chains.size() == 0) return false;
  for (Index c = 0; c < chains.cols(); ++c)
    if (chains.col(c).maxCoeff() == chains.col(c).minCoeff()) return false;
  return true;
}

bool long_enough(const MatrixXd& chains) { return chains.rows() / 2 >= kMinHalf; }

// Biased autocovariance of one centred chain at `lag`.
double autocovariance(const Eigen::VectorXd& centred, Index lag) {
  const Index n = centred.size();
  return centred.head(n - lag).dot(centred.tail(n - lag)) / static_cast<double>(n);
}

MatrixXd indicator(const MatrixXd& chains, double threshold) {
  return (chains.array() <= threshold).cast<double>();
}

}  // namespace

MatrixXd split_chains(const MatrixXd& chains) {
  const Index n = chains.rows();
  if (n < 2) return chains;
  const Index half = n / 2;
  MatrixXd out(half, 2 * chains.cols());
  for (Index c = 0; c < chains.cols(); ++c) {
    out.col(2 * c) = chains.col(c).head(half);
    out.col(2 * c + 1) = chains.col(c).tail(half);
  }
  return out;
}

MatrixXd rank_normalize(const MatrixXd& chains) {
  const Index s = chains.size();
  std::vector<Index> order(static_cast<std::size_t>(s));
  std::iota(order.begin(), order.end(), 0);
  const double* data = chains.data();
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return data[a] < data[b]; });
  MatrixXd out(chains.rows(), chains.cols());
  for (Index i = 0; i < s;) {
    Index j = i;
    while (j + 1 < s && data[order[j + 1]] == data[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double z = normal_quantile((avg_rank - 0.375) / (static_cast<double>(s) + 0.25));
    for (Index k = i; k <= j; ++k) out.data()[order[k]] = z;
    i = j + 1;
  }
  return out;
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::optional<double> basic_rhat(const MatrixXd& chains) {
  if (!usable(chains) || chains.rows() < 2) return std::nullopt;
  const double n = static_cast<double>(chains.rows());
  const Eigen::VectorXd means = chains.colwise().mean();
  Eigen::VectorXd vars(chains.cols());
  for (Index c = 0; c < chains.cols(); ++c)
    vars(c) = (chains.col(c).array() - means(c)).square().sum() / (n - 1.0);
  const double w = vars.mean();
  double b = 0.0;
  if (chains.cols() > 1)
    b = n * (means.array() - means.mean()).square().sum() / static_cast<double>(chains.cols() - 1);
  const double var_hat = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_hat / w);
}

std::optional<double> basic_ess(const MatrixXd& chains) {
  if (!usable(chains) || chains.rows() < 3) return std::nullopt;
  const Index n = chains.rows(), m = chains.cols();
  const double nd = static_cast<double>(n);
  MatrixXd centred = chains.rowwise() - chains.colwise().mean();
  Eigen::VectorXd chain_means = chains.colwise().mean();
  auto mean_acov = [&](Index lag) {
    double total = 0.0;
    for (Index c = 0; c < m; ++c) total += autocovariance(centred.col(c), lag);
    return total / static_cast<double>(m);
  };
  const double mean_var = mean_acov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1)
    var_plus += (chain_means.array() - chain_means.mean()).square().sum() /
                static_cast<double>(m - 1);

  std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
  Index t = 0;
  double rho_even = 1.0;
  rho[0] = rho_even;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  while (t < n - 5 && !std::isnan(rho_even + rho_odd) && rho_even + rho_odd > 0) {
    t += 2;
    rho_even = 1.0 - (mean_var - mean_acov(t)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    if (rho_even + rho_odd >= 0) {
      rho[t] = rho_even;
      rho[t + 1] = rho_odd;
    }
  }
  const Index max_t = t;
  if (rho_even > 0) rho[max_t] = rho_even;
  // initial monotone sequence
  t = 0;
  while (t <= max_t - 4) {
    t += 2;
    if (rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1]) {
      rho[t] = 0.5 * (rho[t - 2] + rho[t - 1]);
      rho[t + 1] = rho[t];
    }
  }
  const double total = static_cast<double>(m) * nd;
  double tau = -1.0 + rho[max_t];
  for (Index k = 0; k < max_t; ++k) tau += 2.0 * rho[k];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

std::optional<double> rhat(const MatrixXd& chains) {
  if (!long_enough(chains) || !usable(chains)) return std::nullopt;
  const MatrixXd split = split_chains(chains);
  const auto bulk = basic_rhat(rank_normalize(split));
  std::vector<double> all(chains.data(), chains.data() + chains.size());
  const double med = quantile(all, 0.5);
  const MatrixXd folded = (chains.array() - med).abs();
  const auto tail = basic_rhat(rank_normalize(split_chains(folded)));
  if (!bulk || !tail) return std::nullopt;
  return std::max(*bulk, *tail);
}

std::optional<double> bulk_ess(const MatrixXd& chains) {
  if (!long_enough(chains) || !usable(chains)) return std::nullopt;
  return basic_ess(rank_normalize(split_chains(chains)));
}

std::optional<double> tail_ess(const MatrixXd& chains) {
  if (!long_enough(chains) || !usable(chains)) return std::nullopt;
  std::vector<double> all(chains.data(), chains.data() + chains.size());
  const auto lo = basic_ess(split_chains(indicator(chains, quantile(all, 0.05))));
  const auto hi = basic_ess(split_chains(indicator(chains, quantile(all, 0.95))));
  if (!lo || !hi) return std::nullopt;
  return std::min(*lo, *hi);
}

std::vector<ParameterSummary> summarize(const PosteriorDraws& draws) {
  std::vector<ParameterSummary> out;
  out.reserve(draws.names.size());
  for (Index col = 0; col < draws.draws.cols(); ++col) {
    ParameterSummary s;
    s.name = draws.names[static_cast<std::size_t>(col)];
    const Eigen::VectorXd v = draws.draws.col(col);
    s.mean = v.mean();
    s.sd = v.size() > 1 ? std::sqrt((v.array() - s.mean).square().sum() / (v.size() - 1)) : 0.0;
    std::vector<double> values(v.data(), v.data() + v.size());
    s.q5 = quantile(values, 0.05);
    s.q50 = quantile(values, 0.5);
    s.q95 = quantile(values, 0.95);
    const MatrixXd chains = draws.by_chain(col);
    s.rhat = rhat(chains);
    s.ess_bulk = bulk_ess(chains);
    s.ess_tail = tail_ess(chains);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace lhsgp
