#pragma once

// Rank-normalised split-R-hat and effective sample sizes. Draws are passed as
// an (iterations x chains) matrix. Undefined results (too few draws, constant
// or non-finite chains) are std::nullopt.

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace lhsgp {

struct PosteriorDraws;

/// max(R-hat of rank-normalised split chains, same for folded draws).
std::optional<double> rhat(const Eigen::MatrixXd& chains);
std::optional<double> bulk_ess(const Eigen::MatrixXd& chains);
/// min of the ESS of I(x <= q05) and I(x <= q95).
std::optional<double> tail_ess(const Eigen::MatrixXd& chains);

/// Classical split-free building blocks, exposed for tests.
std::optional<double> basic_rhat(const Eigen::MatrixXd& chains);
std::optional<double> basic_ess(const Eigen::MatrixXd& chains);
/// Splits each chain in half (dropping the middle draw when odd).
Eigen::MatrixXd split_chains(const Eigen::MatrixXd& chains);
/// Normal scores of average ranks, (r - 3/8) / (S + 1/4), over all entries.
Eigen::MatrixXd rank_normalize(const Eigen::MatrixXd& chains);

/// Type-7 sample quantile.
double quantile(std::vector<double> values, double p);

struct ParameterSummary {
  std::string name;
  double mean = 0.0, sd = 0.0, q5 = 0.0, q50 = 0.0, q95 = 0.0;
  std::optional<double> rhat, ess_bulk, ess_tail;
};

std::vector<ParameterSummary> summarize(const PosteriorDraws& draws);

}  // namespace lhsgp
