#pragma once

// The lhsgp command line: simulate, fit, sbc, casestudy and replay.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <Eigen/Core>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lhsgp/latent_model.hpp"

namespace lhsgp::cli {

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Applies flat "key=value" lines ("rho_f.loc=1.0", "lkj_eta=2", "latent=uniform").
/// '#' starts a comment. Throws InvalidInput on unknown keys or bad values.
PriorSet apply_prior_overrides(PriorSet priors, const std::string& text);

/// Centres each column and scales it to unit sample SD (n - 1 denominator).
/// Throws InvalidInput for a constant column.
void standardize_columns(Eigen::MatrixXd& m);

/// Case-study input after the join, gene selection, subsampling and
/// standardisation.
struct CaseStudyData {
  std::vector<std::string> cell_ids;
  Eigen::VectorXd exp_time;
  std::vector<std::string> genes;
  Eigen::MatrixXd y_f, y_g;  // cells x genes
};

/// `first`/`second` are (unspliced, spliced) for pcHSGP or (spliced,
/// velocity) for pdHSGP. An empty gene list selects every gene column the
/// two files share.
CaseStudyData load_case_study(const std::filesystem::path& first,
                              const std::filesystem::path& second,
                              const std::vector<std::string>& genes, int subsample,
                              std::uint64_t seed);

}  // namespace lhsgp::cli
