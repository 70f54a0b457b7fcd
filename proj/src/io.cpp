#include "lhsgp/io.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "lhsgp/errors.hpp"

namespace lhsgp::io {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

VectorXd CsvTable::numeric_column(int col) const {
  VectorXd v(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double x = 0.0;
    if (!parse_number(rows[r][col], x))
      throw InvalidInput("non-numeric value '" + rows[r][col] + "' in column '" +
                         header[col] + "' at data row " + std::to_string(r + 1));
    v(static_cast<Index>(r)) = x;
  }
  return v;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
      continue;
    }
    if (fields.size() != t.header.size())
      throw InvalidInput("CSV line " + std::to_string(line_no) + " has " +
                         std::to_string(fields.size()) + " fields, header has " +
                         std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  if (first) throw InvalidInput("CSV has no header");
  return t;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_text(path)); }

std::string to_csv(const CsvTable& table) {
  std::string out;
  auto put = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += quote_if_needed(fields[i]);
    }
    out += '\n';
  };
  put(table.header);
  for (const auto& r : table.rows) put(r);
  return out;
}

std::string dataset_csv(const SimDataset& ds) {
  const Index n = ds.N(), d = ds.D();
  std::string out = "id,x_true,x_tilde";
  for (Index j = 0; j < d; ++j) out += ",y_f_" + std::to_string(j + 1);
  for (Index j = 0; j < d; ++j) out += ",y_g_" + std::to_string(j + 1);
  out += '\n';
  for (Index i = 0; i < n; ++i) {
    out += std::to_string(i + 1) + ',' + format_double(ds.x_true(i)) + ',' +
           format_double(ds.x_tilde(i));
    for (Index j = 0; j < d; ++j) out += ',' + format_double(ds.y_f(i, j));
    for (Index j = 0; j < d; ++j) out += ',' + format_double(ds.y_g(i, j));
    out += '\n';
  }
  return out;
}

namespace {

json vec_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_json(const MatrixXd& m) {
  json a = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

VectorXd json_vec(const json& a) {
  VectorXd v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = a[i].get<double>();
  return v;
}

MatrixXd json_mat(const json& a) {
  if (a.empty()) return MatrixXd();
  MatrixXd m(static_cast<Index>(a.size()), static_cast<Index>(a[0].size()));
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = a[r][c].get<double>();
  return m;
}

}  // namespace

std::string dataset_json(const SimDataset& ds, double scale_lambda) {
  json j;
  j["process"] = to_string(ds.process);
  j["seed"] = ds.seed;
  j["s"] = ds.s;
  j["N"] = ds.N();
  j["D"] = ds.D();
  if (ds.process == Process::dGP) j["scale_lambda"] = scale_lambda;
  j["rho"] = vec_json(ds.rho);
  j["rho_f"] = vec_json(ds.rho_f);
  j["rho_g"] = vec_json(ds.rho_g);
  j["alpha_f"] = vec_json(ds.alpha_f);
  j["alpha_g"] = vec_json(ds.alpha_g);
  j["sigma_f"] = vec_json(ds.sigma_f);
  j["sigma_g"] = vec_json(ds.sigma_g);
  j["mu_f"] = vec_json(ds.mu_f);
  j["mu_g"] = vec_json(ds.mu_g);
  j["C"] = mat_json(ds.C);
  j["C_f"] = mat_json(ds.C_f);
  j["C_g"] = mat_json(ds.C_g);
  j["f"] = mat_json(ds.f);
  j["g"] = mat_json(ds.g);
  json truth = json::object();
  for (const auto& [k, v] : ds.truth()) truth[k] = v;
  j["truth"] = std::move(truth);
  return j.dump(2) + "\n";
}

fs::path sidecar_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

LoadedDataset read_dataset(const fs::path& csv_path) {
  const CsvTable t = read_csv(csv_path);
  LoadedDataset out;
  const int xt = t.column("x_tilde");
  if (xt < 0) throw InvalidInput(csv_path.string() + " has no x_tilde column");
  out.x_tilde = t.numeric_column(xt);
  if (int c = t.column("x_true"); c >= 0) out.x_true = t.numeric_column(c);
  auto block = [&](const std::string& prefix) {
    std::vector<int> cols;
    for (int d = 1;; ++d) {
      const int c = t.column(prefix + std::to_string(d));
      if (c < 0) break;
      cols.push_back(c);
    }
    MatrixXd m(static_cast<Index>(t.rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t d = 0; d < cols.size(); ++d)
      m.col(static_cast<Index>(d)) = t.numeric_column(cols[d]);
    return cols.empty() ? MatrixXd() : m;
  };
  out.y_f = block("y_f_");
  out.y_g = block("y_g_");
  if (out.y_f.size() == 0 && out.y_g.size() == 0)
    throw InvalidInput(csv_path.string() + " has no y_f_* or y_g_* columns");

  const fs::path side = sidecar_path(csv_path);
  if (fs::exists(side) && out.x_true) {
    const json j = json::parse(read_text(side));
    SimDataset ds;
    const auto process = parse_process(j.at("process").get<std::string>());
    if (!process) throw InvalidInput(side.string() + ": unknown process");
    ds.process = *process;
    ds.seed = j.at("seed").get<std::uint64_t>();
    ds.s = j.at("s").get<double>();
    ds.x_true = *out.x_true;
    ds.x_tilde = out.x_tilde;
    ds.y_f = out.y_f;
    ds.y_g = out.y_g;
    ds.rho = json_vec(j.at("rho"));
    ds.rho_f = json_vec(j.at("rho_f"));
    ds.rho_g = json_vec(j.at("rho_g"));
    ds.alpha_f = json_vec(j.at("alpha_f"));
    ds.alpha_g = json_vec(j.at("alpha_g"));
    ds.sigma_f = json_vec(j.at("sigma_f"));
    ds.sigma_g = json_vec(j.at("sigma_g"));
    ds.mu_f = json_vec(j.at("mu_f"));
    ds.mu_g = json_vec(j.at("mu_g"));
    ds.C = json_mat(j.at("C"));
    ds.C_f = json_mat(j.at("C_f"));
    ds.C_g = json_mat(j.at("C_g"));
    ds.f = json_mat(j.at("f"));
    ds.g = json_mat(j.at("g"));
    out.sim = std::move(ds);
  }
  return out;
}

std::string draws_csv(const PosteriorDraws& draws) {
  std::string out;
  for (std::size_t i = 0; i < draws.names.size(); ++i) {
    if (i) out += ',';
    out += quote_if_needed(draws.names[i]);
  }
  out += '\n';
  for (Index r = 0; r < draws.draws.rows(); ++r) {
    for (Index c = 0; c < draws.draws.cols(); ++c) {
      if (c) out += ',';
      out += format_double(draws.draws(r, c));
    }
    out += '\n';
  }
  return out;
}

PosteriorDraws read_draws(const fs::path& path, Index draws_per_chain) {
  const CsvTable t = read_csv(path);
  PosteriorDraws d;
  d.names = t.header;
  d.draws.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(t.header.size()));
  for (std::size_t c = 0; c < t.header.size(); ++c)
    d.draws.col(static_cast<Index>(c)) = t.numeric_column(static_cast<int>(c));
  d.draws_per_chain = draws_per_chain;
  if (draws_per_chain <= 0 || d.draws.rows() % draws_per_chain != 0)
    throw ShapeError("draw count is not a multiple of draws_per_chain");
  return d;
}

}  // namespace lhsgp::io
