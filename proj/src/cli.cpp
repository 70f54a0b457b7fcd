#include "lhsgp/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lhsgp/calibrate.hpp"
#include "lhsgp/diagnostics.hpp"
#include "lhsgp/errors.hpp"
#include "lhsgp/io.hpp"
#include "lhsgp/parallel.hpp"
#include "lhsgp/random.hpp"
#include "lhsgp/sampler.hpp"
#include "lhsgp/simgen.hpp"

#ifndef LHSGP_VERSION
#define LHSGP_VERSION "unknown"
#endif

namespace lhsgp::cli {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

json flags_of(const CLI::App& sub) {
  json flags = json::object();
  for (const CLI::Option* o : sub.get_options()) {
    if (o->get_lnames().empty()) continue;
    const std::string& name = o->get_lnames().front();
    if (name == "help") continue;
    if (o->count() > 0) {
      const auto& r = o->results();
      flags[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      flags[name] = o->get_default_str();
    }
  }
  return flags;
}

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  json flags;
  std::uint64_t seed = 0;
  std::string start;
  std::vector<std::string> outputs;

  void write(const fs::path& dir) const {
    json j;
    j["command"] = command;
    j["args"] = args;
    j["flags"] = flags;
    j["seed"] = seed;
    j["version"] = LHSGP_VERSION;
    j["start"] = start;
    j["end"] = now_utc();
    j["outputs"] = outputs;
    io::write_atomic(dir / "manifest.json", j.dump(2) + "\n");
  }
};

std::optional<ModelVariant> variant_or_usage(const std::string& name) {
  auto v = parse_variant(name);
  if (!v) throw UsageError("unknown model '" + name + "' (pchsgp, pdhsgp, shsgp, sdhsgp)");
  return v;
}

PriorSet preset(const std::string& name) {
  if (name == "pcgp") return PriorSet::pcgp_simulation();
  if (name == "dgp") return PriorSet::dgp_simulation();
  if (name == "casestudy") return PriorSet::case_study();
  throw UsageError("unknown prior preset '" + name + "' (pcgp, dgp, casestudy)");
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string opt_text(const std::optional<double>& v) {
  return v ? io::format_double(*v) : std::string("NA");
}

Index clamp_count(const PosteriorDraws& draws, const Basis& basis, Index n) {
  Index count = 0;
  for (Index i = 0; i < n; ++i) {
    const Index col = draws.column("x[" + std::to_string(i + 1) + "]");
    if (col < 0) continue;
    count += ((draws.draws.col(col).array() - basis.center).abs() > basis.clamp_radius())
                 .count();
  }
  return count;
}

json diagnostics_json(const LatentModelSpec& spec, const SamplerConfig& sc,
                      const PosteriorDraws& draws,
                      const std::vector<ParameterSummary>& summaries, double wall) {
  json d;
  d["model"] = to_string(spec.variant);
  d["N"] = spec.N();
  d["D"] = spec.D();
  d["M"] = spec.M();
  d["iters"] = sc.iters;
  d["warmup"] = sc.warmup;
  d["chains"] = sc.chains;
  d["seed"] = sc.seed;
  d["draws_per_chain"] = draws.draws_per_chain;
  json params = json::array();
  for (const auto& s : summaries)
    params.push_back({{"name", s.name},
                      {"mean", s.mean},
                      {"sd", s.sd},
                      {"q5", s.q5},
                      {"q50", s.q50},
                      {"q95", s.q95},
                      {"rhat", opt_json(s.rhat)},
                      {"ess_bulk", opt_json(s.ess_bulk)},
                      {"ess_tail", opt_json(s.ess_tail)}});
  d["parameters"] = std::move(params);
  d["divergences"] = draws.total_divergences();
  json chains = json::array();
  for (const auto& c : draws.chains)
    chains.push_back({{"chain", c.chain},
                      {"seed", c.seed},
                      {"step_size", c.step_size},
                      {"mean_accept", c.mean_accept},
                      {"divergences", c.divergences},
                      {"warmup_divergences", c.warmup_divergences},
                      {"gradient_evaluations", c.gradient_evaluations},
                      {"treedepth_histogram", c.treedepth_histogram},
                      {"divergence_flag", c.divergence_flag}});
  d["chains"] = std::move(chains);
  d["basis_clamp_count"] = clamp_count(draws, spec.basis, spec.N());
  d["wall_time_seconds"] = wall;
  return d;
}

std::string summary_csv(const std::vector<ParameterSummary>& summaries) {
  std::string out = "name,mean,sd,q5,q50,q95,rhat,ess_bulk,ess_tail\n";
  for (const auto& s : summaries)
    out += s.name + ',' + io::format_double(s.mean) + ',' + io::format_double(s.sd) + ',' +
           io::format_double(s.q5) + ',' + io::format_double(s.q50) + ',' +
           io::format_double(s.q95) + ',' + opt_text(s.rhat) + ',' + opt_text(s.ess_bulk) +
           ',' + opt_text(s.ess_tail) + '\n';
  return out;
}

struct SamplerOpts {
  int iters = 2000;
  int warmup = 1000;
  int chains = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  double target_accept = 0.8;
  int max_treedepth = 10;

  void add(CLI::App* sub) {
    sub->add_option("--iters", iters, "Iterations per chain, warmup included");
    sub->add_option("--warmup", warmup, "Warmup iterations per chain");
    sub->add_option("--chains", chains, "Number of chains");
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--threads", threads, "Worker threads (0: HSGP_THREADS or all cores)");
    sub->add_option("--target-accept", target_accept, "Dual-averaging target acceptance");
    sub->add_option("--max-treedepth", max_treedepth, "NUTS maximum tree depth");
  }
  SamplerConfig config() const {
    SamplerConfig sc;
    sc.iters = iters;
    sc.warmup = warmup;
    sc.chains = chains;
    sc.seed = seed;
    sc.threads = threads;
    sc.target_accept = target_accept;
    sc.max_treedepth = max_treedepth;
    try {
      sc.validate();
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
    return sc;
  }
};

// ---- simulate ----

struct SimulateOpts {
  std::string scenario, out;
  int n = 0, d = 0, trials = 1;
  std::uint64_t seed = 0;
  double lambda = 10.0, s = 0.3;
  CLI::Option* lambda_opt = nullptr;
};

int cmd_simulate(const SimulateOpts& o, Manifest& m, std::ostream& out) {
  const auto process = parse_process(o.scenario);
  if (!process) throw UsageError("--scenario must be pcgp or dgp");
  if (*process == Process::pcGP && o.lambda_opt->count() > 0)
    throw UsageError("--lambda applies to the dgp scenario only");
  if (o.n < 2 || o.d < 1 || o.trials < 1)
    throw UsageError("--n >= 2, --d >= 1 and --trials >= 1 are required");
  if (!(o.lambda > 0.0) || !(o.s >= 0.0)) throw UsageError("--lambda > 0 and --s >= 0 required");
  const fs::path dir = o.out;
  std::vector<std::string> paths(static_cast<std::size_t>(o.trials));
  parallel_for(
      paths.size(),
      [&](std::size_t t) {
        ScenarioConfig cfg = ScenarioConfig::make(*process, o.n, o.d, o.seed + t);
        cfg.scale_lambda = o.lambda;
        cfg.s = o.s;
        const SimDataset ds = generate(cfg);
        const fs::path csv = dir / (to_string(*process) + "_n" + std::to_string(o.n) + "_d" +
                                    std::to_string(o.d) + "_seed" +
                                    std::to_string(o.seed + t) + ".csv");
        io::write_atomic(csv, io::dataset_csv(ds));
        io::write_atomic(io::sidecar_path(csv), io::dataset_json(ds, o.lambda));
        paths[t] = csv.string();
      },
      worker_count());
  for (const auto& p : paths) {
    m.outputs.push_back(p);
    m.outputs.push_back(io::sidecar_path(p).string());
    out << p << '\n';
  }
  m.seed = o.seed;
  m.write(dir);
  return 0;
}

// ---- fit ----

struct FitOpts {
  std::string model, data, out, priors_file, preset_name;
  int m = 30;
  double c = 1.25;
  std::optional<double> s;
  SamplerOpts sampler;
};

PriorSet resolve_priors(const std::string& preset_name, const std::string& file,
                        const std::optional<SimDataset>& sim) {
  PriorSet p;
  if (!preset_name.empty())
    p = preset(preset_name);
  else if (sim && sim->process == Process::dGP)
    p = PriorSet::dgp_simulation();
  else
    p = PriorSet::pcgp_simulation();
  if (!file.empty()) p = apply_prior_overrides(p, io::read_text(file));
  return p;
}

void check_blocks(ModelVariant v, bool has_f, bool has_g, std::ostream& err) {
  const bool need_f = has_f_block(v), need_g = has_g_block(v);
  if (need_f && !has_f) throw InvalidInput(to_string(v) + " needs y_f columns in the data");
  if (need_g && !has_g) throw InvalidInput(to_string(v) + " needs y_g columns in the data");
  if (!need_g && has_g) err << "warning: " << to_string(v) << " ignores the y_g block\n";
  if (!need_f && has_f) err << "warning: " << to_string(v) << " ignores the y_f block\n";
}

int cmd_fit(const FitOpts& o, Manifest& m, std::ostream& out, std::ostream& err) {
  const ModelVariant variant = *variant_or_usage(o.model);
  const SamplerConfig sc = o.sampler.config();
  if (o.m < 1 || !(o.c > 1.0)) throw UsageError("--m >= 1 and --c > 1 required");
  const io::LoadedDataset data = io::read_dataset(o.data);
  check_blocks(variant, data.y_f.size() > 0, data.y_g.size() > 0, err);
  const double s = o.s ? *o.s : (data.sim ? data.sim->s : 0.3);
  const PriorSet priors = resolve_priors(o.preset_name, o.priors_file, data.sim);
  const LatentModelSpec spec =
      make_latent_spec(variant, data.x_tilde, data.y_f, data.y_g, priors, s, o.m, o.c);
  const LatentModel model(spec);

  const auto t0 = std::chrono::steady_clock::now();
  const PosteriorDraws draws = sample(LatentModelTarget(model), sc);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto summaries = summarize(draws);

  json diag = diagnostics_json(spec, sc, draws, summaries, wall);
  diag["c"] = o.c;
  diag["s"] = s;
  if (data.sim) {
    const Index n = spec.N();
    MatrixXd xs(draws.draws.rows(), n);
    for (Index i = 0; i < n; ++i)
      xs.col(i) = draws.draws.col(draws.column("x[" + std::to_string(i + 1) + "]"));
    json acc;
    acc["rmse_x"] = rmse(xs, data.sim->x_true);
    acc["rmse_x_tilde"] = rmse(data.sim->x_tilde.transpose(), data.sim->x_true);
    json rows = json::array();
    for (const auto& r : hyperparameter_rmse(draws, data.sim->truth()))
      rows.push_back({{"class", r.cls}, {"rmse", r.rmse}, {"parameters", r.parameters}});
    acc["hyperparameter_rmse"] = std::move(rows);
    diag["accuracy"] = std::move(acc);
  }

  const fs::path dir = o.out;
  io::write_atomic(dir / "draws.csv", io::draws_csv(draws));
  io::write_atomic(dir / "summary.csv", summary_csv(summaries));
  io::write_atomic(dir / "diagnostics.json", diag.dump(2) + "\n");
  for (const char* f : {"draws.csv", "summary.csv", "diagnostics.json"})
    m.outputs.push_back((dir / f).string());
  m.seed = sc.seed;
  m.write(dir);
  out << "fit " << to_string(variant) << ": " << draws.draws.rows() << " draws, "
      << draws.total_divergences() << " divergences -> " << dir.string() << '\n';
  return 0;
}

// ---- sbc ----

struct SbcOpts {
  std::string model, out, priors_file, preset_name = "pcgp";
  int trials = 0, n = 0, d = 0, m = 10, thin = 5;
  double c = 1.25, s = 0.3, coverage = 0.95;
  bool strict = true;
  SamplerOpts sampler;
};

int cmd_sbc(const SbcOpts& o, Manifest& m, std::ostream& out, std::ostream& err) {
  if (o.trials < 20) throw UsageError("--trials must be at least 20 for the gamma test");
  if (o.n < 1 || o.d < 1 || o.m < 1 || o.thin < 1)
    throw UsageError("--n, --d, --m and --thin must be positive");
  if (o.sampler.chains != 1) throw UsageError("sbc runs one chain per trial");
  SbcConfig cfg;
  cfg.variant = *variant_or_usage(o.model);
  cfg.priors = resolve_priors(o.preset_name, o.priors_file, std::nullopt);
  cfg.trials = o.trials;
  cfg.N = o.n;
  cfg.D = o.d;
  cfg.M = o.m;
  cfg.c = o.c;
  cfg.s = o.s;
  cfg.seed = o.sampler.seed;
  cfg.thin = o.thin;
  cfg.coverage = o.coverage;
  const SamplerConfig sc = o.sampler.config();
  cfg.iters = sc.iters;
  cfg.warmup = sc.warmup;
  cfg.threads = sc.threads;
  const SbcResult res = run_sbc(cfg);

  json r;
  r["model"] = to_string(cfg.variant);
  r["J"] = res.J;
  r["H"] = res.H;
  r["thin"] = cfg.thin;
  r["coverage"] = res.coverage;
  r["log_threshold"] = res.log_threshold;
  json params = json::array();
  for (std::size_t p = 0; p < res.names.size(); ++p)
    params.push_back({{"name", res.names[p]},
                      {"class", sbc_class(res.names[p])},
                      {"log_gamma", res.log_gamma[p]},
                      {"log_gamma_offset", res.log_gamma[p] - res.log_threshold}});
  r["parameters"] = std::move(params);
  json classes = json::array();
  for (const auto& c : res.classes)
    classes.push_back({{"class", c.cls},
                       {"members", c.members},
                       {"min_log_gamma_offset", c.min_log_gamma_offset},
                       {"pooled_log_gamma_offset", c.pooled_log_gamma_offset},
                       {"pass", c.pass}});
  r["classes"] = std::move(classes);
  r["pass_fraction"] = res.pass_fraction();
  json failed = json::array();
  for (std::size_t i = 0; i < res.failed_trials.size(); ++i)
    failed.push_back({{"trial", res.failed_trials[i]}, {"message", res.failure_messages[i]}});
  r["failed_trials"] = std::move(failed);

  std::string ranks = "trial";
  for (const auto& n : res.names) ranks += ',' + n;
  ranks += '\n';
  std::set<int> failed_set(res.failed_trials.begin(), res.failed_trials.end());
  int row = 0;
  for (int t = 0; t < o.trials; ++t) {
    if (failed_set.count(t)) continue;
    ranks += std::to_string(t);
    for (Index p = 0; p < res.ranks.cols(); ++p) ranks += ',' + std::to_string(res.ranks(row, p));
    ranks += '\n';
    ++row;
  }

  const fs::path dir = o.out;
  io::write_atomic(dir / "sbc_report.json", r.dump(2) + "\n");
  io::write_atomic(dir / "ranks.csv", ranks);
  m.outputs = {(dir / "sbc_report.json").string(), (dir / "ranks.csv").string()};
  m.seed = cfg.seed;
  m.write(dir);
  for (const auto& c : res.classes)
    out << c.cls << ": offset " << c.min_log_gamma_offset << (c.pass ? " pass" : " REJECT")
        << '\n';
  if (!res.failed_trials.empty())
    err << res.failed_trials.size() << " trial(s) failed and were excluded\n";
  if (o.strict && !res.all_pass()) {
    err << "uniformity rejected for at least one parameter class\n";
    return 1;
  }
  return 0;
}

// ---- casestudy ----

struct CaseOpts {
  std::string unspliced, spliced, velocity, genes, out, priors_file;
  int m = 10, subsample = 0;
  double s = 0.1, c = 1.25;
  SamplerOpts sampler;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ','))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

int cmd_casestudy(const CaseOpts& o, Manifest& m, std::ostream& out) {
  if (o.spliced.empty()) throw UsageError("--spliced is required");
  if (o.unspliced.empty() == o.velocity.empty())
    throw UsageError("give exactly one of --unspliced (pcHSGP) or --velocity (pdHSGP)");
  if (o.m < 1 || !(o.s > 0.0) || o.subsample < 0) throw UsageError("bad --m, --s or --subsample");
  const bool derivative = !o.velocity.empty();
  const ModelVariant variant = derivative ? ModelVariant::pdHSGP : ModelVariant::pcHSGP;
  const SamplerConfig sc = o.sampler.config();
  const CaseStudyData data =
      derivative ? load_case_study(o.spliced, o.velocity, split_list(o.genes), o.subsample, sc.seed)
                 : load_case_study(o.unspliced, o.spliced, split_list(o.genes), o.subsample,
                                   sc.seed);
  PriorSet priors = PriorSet::case_study();
  if (!o.priors_file.empty()) priors = apply_prior_overrides(priors, io::read_text(o.priors_file));
  LatentModelSpec spec =
      make_latent_spec(variant, data.exp_time, data.y_f, data.y_g, priors, o.s, o.m, o.c);
  if (priors.latent == LatentPriorKind::Uniform)
    spec.basis = make_basis(priors.uniform_lo, priors.uniform_hi, o.c, o.m);
  const LatentModel model(spec);

  const auto t0 = std::chrono::steady_clock::now();
  const PosteriorDraws draws = sample(LatentModelTarget(model), sc);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto summaries = summarize(draws);
  json diag = diagnostics_json(spec, sc, draws, summaries, wall);
  diag["genes"] = data.genes;
  diag["s"] = o.s;
  diag["c"] = o.c;

  std::string cells = "cell_id,exp_time,mean,q5,q50,q95\n";
  for (Index i = 0; i < spec.N(); ++i) {
    const auto& s = summaries[static_cast<std::size_t>(
        draws.column("x[" + std::to_string(i + 1) + "]"))];
    cells += data.cell_ids[static_cast<std::size_t>(i)] + ',' +
             io::format_double(data.exp_time(i)) + ',' + io::format_double(s.mean) + ',' +
             io::format_double(s.q5) + ',' + io::format_double(s.q50) + ',' +
             io::format_double(s.q95) + '\n';
  }
  const fs::path dir = o.out;
  io::write_atomic(dir / "ordering.csv", cells);
  io::write_atomic(dir / "draws.csv", io::draws_csv(draws));
  io::write_atomic(dir / "diagnostics.json", diag.dump(2) + "\n");
  for (const char* f : {"ordering.csv", "draws.csv", "diagnostics.json"})
    m.outputs.push_back((dir / f).string());
  m.seed = sc.seed;
  m.write(dir);
  out << "casestudy " << to_string(variant) << ": " << spec.N() << " cells, "
      << data.genes.size() << " genes -> " << dir.string() << '\n';
  return 0;
}

}  // namespace

// ---- library helpers ----

PriorSet apply_prior_overrides(PriorSet p, const std::string& text) {
  std::unordered_map<std::string, double*> numeric = {
      {"rho_f.loc", &p.f.rho.loc},     {"rho_f.scale", &p.f.rho.scale},
      {"rho.loc", &p.f.rho.loc},       {"rho.scale", &p.f.rho.scale},
      {"alpha_f.loc", &p.f.alpha.loc}, {"alpha_f.scale", &p.f.alpha.scale},
      {"sigma_f.loc", &p.f.sigma.loc}, {"sigma_f.scale", &p.f.sigma.scale},
      {"rho_g.loc", &p.g.rho.loc},     {"rho_g.scale", &p.g.rho.scale},
      {"alpha_g.loc", &p.g.alpha.loc}, {"alpha_g.scale", &p.g.alpha.scale},
      {"sigma_g.loc", &p.g.sigma.loc}, {"sigma_g.scale", &p.g.sigma.scale},
      {"mean.loc", &p.mean.loc},       {"mean.scale", &p.mean.scale},
      {"lkj_eta", &p.lkj_eta},         {"uniform.lo", &p.uniform_lo},
      {"uniform.hi", &p.uniform_hi}};
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("priors line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "latent") {
      if (value == "gaussian") p.latent = LatentPriorKind::Gaussian;
      else if (value == "uniform") p.latent = LatentPriorKind::Uniform;
      else throw InvalidInput("latent must be gaussian or uniform");
      continue;
    }
    if (key == "mean.positive") {
      if (value != "true" && value != "false")
        throw InvalidInput("mean.positive must be true or false");
      p.mean_positive = value == "true";
      continue;
    }
    auto it = numeric.find(key);
    if (it == numeric.end()) throw InvalidInput("unknown prior key '" + key + "'");
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v))
      throw InvalidInput("prior key '" + key + "' has non-numeric value '" + value + "'");
    *it->second = v;
  }
  for (const HalfNormalPrior* h : {&p.f.rho, &p.f.alpha, &p.f.sigma, &p.g.rho, &p.g.alpha,
                                   &p.g.sigma, &p.mean})
    if (!(h->scale > 0.0)) throw InvalidInput("prior scales must be positive");
  return p;
}

void standardize_columns(MatrixXd& m) {
  if (m.rows() < 2) throw InvalidInput("standardisation needs at least two rows");
  for (Index c = 0; c < m.cols(); ++c) {
    auto col = m.col(c).array();
    col -= col.mean();
    const double sd = std::sqrt(col.square().sum() / static_cast<double>(m.rows() - 1));
    if (!(sd > 0.0)) throw InvalidInput("column " + std::to_string(c + 1) + " is constant");
    col /= sd;
    col -= col.mean();
  }
}

CaseStudyData load_case_study(const fs::path& first, const fs::path& second,
                              const std::vector<std::string>& genes, int subsample,
                              std::uint64_t seed) {
  const io::CsvTable a = io::read_csv(first);
  const io::CsvTable b = io::read_csv(second);
  for (const auto* t : {&a, &b}) {
    const fs::path& p = t == &a ? first : second;
    if (t->column("cell_id") < 0 || t->column("exp_time") < 0)
      throw InvalidInput(p.string() + " needs cell_id and exp_time columns");
    const VectorXd et = t->numeric_column(t->column("exp_time"));
    for (Index i = 0; i < et.size(); ++i)
      if (!(et(i) >= 0.0 && et(i) <= 1.0))
        throw InvalidInput(p.string() + ": exp_time outside [0, 1] at data row " +
                           std::to_string(i + 1));
  }
  auto ids = [](const io::CsvTable& t, const fs::path& p) {
    std::unordered_map<std::string, std::size_t> index;
    const int c = t.column("cell_id");
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      if (!index.emplace(t.rows[r][c], r).second)
        throw InvalidInput(p.string() + ": duplicate cell_id '" + t.rows[r][c] + "'");
    return index;
  };
  const auto ids_a = ids(a, first);
  const auto ids_b = ids(b, second);
  if (ids_a.size() != ids_b.size())
    throw InvalidInput("cell_id sets differ: " + std::to_string(ids_a.size()) + " vs " +
                       std::to_string(ids_b.size()) + " cells");
  for (const auto& [id, _] : ids_a)
    if (!ids_b.count(id))
      throw InvalidInput("cell_id '" + id + "' is missing from " + second.string());

  std::vector<std::string> chosen = genes;
  if (chosen.empty()) {
    for (const auto& h : a.header)
      if (h != "cell_id" && h != "exp_time" && b.column(h) >= 0) chosen.push_back(h);
    if (chosen.empty()) throw InvalidInput("the two files share no gene columns");
  }
  for (const auto* t : {&a, &b}) {
    for (const auto& g : chosen) {
      if (t->column(g) >= 0) continue;
      std::string listing;
      for (const auto& h : t->header)
        if (h != "cell_id" && h != "exp_time") listing += (listing.empty() ? "" : ", ") + h;
      throw InvalidInput("gene '" + g + "' not found in " +
                         (t == &a ? first : second).string() + "; columns: " + listing);
    }
  }

  std::vector<std::size_t> rows(a.rows.size());
  std::iota(rows.begin(), rows.end(), 0);
  if (subsample > 0 && static_cast<std::size_t>(subsample) < rows.size()) {
    std::mt19937_64 rng = make_stream_rng(seed, 0x5ab5u);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(static_cast<std::size_t>(subsample));
    std::sort(rows.begin(), rows.end());
  }

  CaseStudyData d;
  d.genes = chosen;
  const Index n = static_cast<Index>(rows.size());
  const Index g = static_cast<Index>(chosen.size());
  const VectorXd et = a.numeric_column(a.column("exp_time"));
  d.exp_time.resize(n);
  d.y_f.resize(n, g);
  d.y_g.resize(n, g);
  std::vector<VectorXd> cols_a, cols_b;
  for (const auto& gene : chosen) {
    cols_a.push_back(a.numeric_column(a.column(gene)));
    cols_b.push_back(b.numeric_column(b.column(gene)));
  }
  const int id_col = a.column("cell_id");
  for (Index i = 0; i < n; ++i) {
    const std::size_t ra = rows[static_cast<std::size_t>(i)];
    const std::string& id = a.rows[ra][id_col];
    const std::size_t rb = ids_b.at(id);
    d.cell_ids.push_back(id);
    d.exp_time(i) = et(static_cast<Index>(ra));
    for (Index j = 0; j < g; ++j) {
      d.y_f(i, j) = cols_a[j](static_cast<Index>(ra));
      d.y_g(i, j) = cols_b[j](static_cast<Index>(rb));
    }
  }
  standardize_columns(d.y_f);
  standardize_columns(d.y_g);
  return d;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-input Hilbert-space GP toolkit", "lhsgp"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(LHSGP_VERSION));

  SimulateOpts sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate simulation datasets");
  simulate->add_option("--scenario", sim.scenario, "pcgp or dgp")->required();
  simulate->add_option("--n", sim.n, "Number of observations")->required();
  simulate->add_option("--d", sim.d, "Output dimensions")->required();
  simulate->add_option("--seed", sim.seed, "Seed of the first trial")->required();
  simulate->add_option("--out", sim.out, "Output directory")->required();
  sim.lambda_opt = simulate->add_option("--lambda", sim.lambda, "dGP output/derivative scale");
  simulate->add_option("--s", sim.s, "Measurement SD of x_tilde");
  simulate->add_option("--trials", sim.trials, "Datasets, seeds seed..seed+trials-1");

  FitOpts fit;
  CLI::App* fitc = app.add_subcommand("fit", "Fit a latent-input HSGP to a dataset");
  fitc->add_option("--model", fit.model, "pchsgp, pdhsgp, shsgp or sdhsgp")->required();
  fitc->add_option("--data", fit.data, "Dataset CSV")->required();
  fitc->add_option("--out", fit.out, "Output directory")->required();
  fitc->add_option("--m", fit.m, "Basis functions");
  fitc->add_option("--c", fit.c, "Boundary factor");
  fitc->add_option("--s", fit.s, "Measurement SD (default: dataset sidecar, else 0.3)");
  fitc->add_option("--priors", fit.priors_file, "key=value prior overrides");
  fitc->add_option("--preset", fit.preset_name, "pcgp, dgp or casestudy priors");
  fit.sampler.add(fitc);

  SbcOpts sbc;
  CLI::App* sbcc = app.add_subcommand("sbc", "Simulation-based calibration");
  sbcc->add_option("--model", sbc.model, "pchsgp, pdhsgp, shsgp or sdhsgp")->required();
  sbcc->add_option("--trials", sbc.trials, "Number of SBC trials J (>= 20)")->required();
  sbcc->add_option("--n", sbc.n, "Observations per trial")->required();
  sbcc->add_option("--d", sbc.d, "Output dimensions")->required();
  sbcc->add_option("--m", sbc.m, "Basis functions");
  sbcc->add_option("--out", sbc.out, "Output directory")->required();
  sbcc->add_option("--c", sbc.c, "Boundary factor");
  sbcc->add_option("--s", sbc.s, "Measurement SD");
  sbcc->add_option("--thin", sbc.thin, "Keep every k-th draw before ranking");
  sbcc->add_option("--coverage", sbc.coverage, "Gamma test coverage");
  sbcc->add_option("--priors", sbc.priors_file, "key=value prior overrides");
  sbcc->add_option("--preset", sbc.preset_name, "pcgp, dgp or casestudy priors");
  sbcc->add_flag("--strict,!--no-strict", sbc.strict,
                 "Exit with status 1 when a parameter class rejects uniformity");
  sbc.sampler.add(sbcc);

  CaseOpts cs;
  CLI::App* csc = app.add_subcommand("casestudy", "Latent cell ordering from expression data");
  csc->add_option("--unspliced", cs.unspliced, "Unspliced expression CSV (pcHSGP)");
  csc->add_option("--spliced", cs.spliced, "Spliced expression CSV")->required();
  csc->add_option("--velocity", cs.velocity, "RNA velocity CSV (pdHSGP)");
  csc->add_option("--genes", cs.genes, "Comma-separated gene columns");
  csc->add_option("--m", cs.m, "Basis functions");
  csc->add_option("--s", cs.s, "Measurement SD of exp_time");
  csc->add_option("--c", cs.c, "Boundary factor");
  csc->add_option("--subsample", cs.subsample, "Random subset of cells (0: all)");
  csc->add_option("--priors", cs.priors_file, "key=value prior overrides");
  csc->add_option("--out", cs.out, "Output directory")->required();
  cs.sampler.add(csc);

  std::string manifest_path, replay_out;
  CLI::App* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->add_option("--manifest", manifest_path, "manifest.json")->required();
  replay->add_option("--out", replay_out, "Write to this directory instead");

  std::vector<std::string> argv_store = {"lhsgp"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    Manifest m;
    m.args = args;
    m.start = now_utc();
    if (*simulate) {
      m.command = "simulate";
      m.flags = flags_of(*simulate);
      return cmd_simulate(sim, m, out);
    }
    if (*fitc) {
      m.command = "fit";
      m.flags = flags_of(*fitc);
      return cmd_fit(fit, m, out, err);
    }
    if (*sbcc) {
      m.command = "sbc";
      m.flags = flags_of(*sbcc);
      return cmd_sbc(sbc, m, out, err);
    }
    if (*csc) {
      m.command = "casestudy";
      m.flags = flags_of(*csc);
      return cmd_casestudy(cs, m, out);
    }
    const json j = json::parse(io::read_text(manifest_path));
    std::vector<std::string> rerun = j.at("args").get<std::vector<std::string>>();
    if (!rerun.empty() && rerun.front() == "replay") throw UsageError("cannot replay a replay");
    if (!replay_out.empty()) {
      auto it = std::find(rerun.begin(), rerun.end(), "--out");
      if (it != rerun.end() && std::next(it) != rerun.end()) {
        *std::next(it) = replay_out;
      } else {
        rerun.push_back("--out");
        rerun.push_back(replay_out);
      }
    }
    return run(rerun, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lhsgp::cli
