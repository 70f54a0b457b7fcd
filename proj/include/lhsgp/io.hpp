#pragma once

// Text interchange: CSV tables with 17-significant-digit floats, simulated
// datasets with their truth sidecars, posterior draws and diagnostics JSON.
// Every file is written to a temporary name and renamed into place.

#include <Eigen/Core>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lhsgp/calibrate.hpp"
#include "lhsgp/sampler.hpp"
#include "lhsgp/simgen.hpp"

namespace lhsgp::io {

namespace fs = std::filesystem;

/// 17 significant digits ("%.17g"), which round-trips every double.
std::string format_double(double v);

/// Writes `content` to `path` via a temporary file and rename.
void write_atomic(const fs::path& path, const std::string& content);
std::string read_text(const fs::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index, or -1.
  int column(const std::string& name) const;
  /// Parses column `col` as doubles; throws InvalidInput naming the row.
  Eigen::VectorXd numeric_column(int col) const;
};

/// Comma-separated, optional double quotes around fields, header line first.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const fs::path& path);
std::string to_csv(const CsvTable& table);

/// Dataset CSV: id, x_true, x_tilde, y_f_1..y_f_D, y_g_1..y_g_D.
std::string dataset_csv(const SimDataset& ds);
/// Truth sidecar: process, seed, s and every true hyperparameter.
std::string dataset_json(const SimDataset& ds, double scale_lambda);

/// A dataset read back from disk. x_true and the truth are present only when
/// the CSV has an x_true column and a sidecar was found.
struct LoadedDataset {
  Eigen::VectorXd x_tilde;
  std::optional<Eigen::VectorXd> x_true;
  Eigen::MatrixXd y_f, y_g;  // empty when the columns are absent
  std::optional<SimDataset> sim;  // full record when the sidecar exists
};

LoadedDataset read_dataset(const fs::path& csv_path);
/// Sidecar path used for a dataset CSV ("a.csv" -> "a.json").
fs::path sidecar_path(const fs::path& csv_path);

/// One row per retained draw (chains in order), one column per name.
std::string draws_csv(const PosteriorDraws& draws);
PosteriorDraws read_draws(const fs::path& path, Eigen::Index draws_per_chain);

}  // namespace lhsgp::io
