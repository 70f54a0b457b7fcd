#include "lhsgp/latent_model.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>

#include "lhsgp/correlation.hpp"
#include "lhsgp/errors.hpp"
#include "lhsgp/random.hpp"

namespace lhsgp {
namespace {

using Slot = ParameterLayout::Slot;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct BlockView {
  bool derivative = false;
  Slot rho, alpha, sigma, mu, beta, corr;
  int corr_index = 0;  // which accumulated A-adjoint this block feeds
  const MatrixXd* y = nullptr;
  bool is_f = true;
};

struct PriorSlot {
  Slot slot;
  HalfNormalPrior prior;
};

std::vector<BlockView> blocks_of(const LatentModelSpec& spec, const ParameterLayout& l) {
  std::vector<BlockView> out;
  switch (spec.variant) {
    case ModelVariant::pcHSGP:
      out.push_back({false, l.rho_f, l.alpha_f, l.sigma_f, l.mu_f, l.beta_f, l.corr_f, 0,
                     &spec.y_f, true});
      out.push_back({false, l.rho_g, l.alpha_g, l.sigma_g, l.mu_g, l.beta_g, l.corr_g, 1,
                     &spec.y_g, false});
      break;
    case ModelVariant::pdHSGP:
      out.push_back({false, l.rho, l.alpha_f, l.sigma_f, l.mu_f, l.beta_f, l.corr, 0,
                     &spec.y_f, true});
      out.push_back({true, l.rho, l.alpha_g, l.sigma_g, l.mu_g, l.beta_g, l.corr, 0,
                     &spec.y_g, false});
      break;
    case ModelVariant::sHSGP:
      out.push_back({false, l.rho, l.alpha_f, l.sigma_f, l.mu_f, l.beta_f, l.corr, 0,
                     &spec.y_f, true});
      break;
    case ModelVariant::sdHSGP:
      out.push_back({true, l.rho, l.alpha_g, l.sigma_g, l.mu_g, l.beta_g, l.corr, 0,
                     &spec.y_g, false});
      break;
  }
  return out;
}

std::vector<PriorSlot> hyper_slots(const LatentModelSpec& spec, const ParameterLayout& l) {
  const PriorSet& p = spec.priors;
  std::vector<PriorSlot> out;
  auto add = [&](const Slot& s, const HalfNormalPrior& prior) {
    if (s.present()) out.push_back({s, prior});
  };
  add(l.rho_f, p.f.rho);
  add(l.rho_g, p.g.rho);
  add(l.rho, p.f.rho);
  add(l.alpha_f, p.f.alpha);
  add(l.alpha_g, p.g.alpha);
  add(l.sigma_f, p.f.sigma);
  add(l.sigma_g, p.g.sigma);
  return out;
}

std::array<Slot, 2> corr_slots(const ParameterLayout& l) {
  if (l.corr_f.present()) return {l.corr_f, l.corr_g};
  return {l.corr, Slot{}};
}

double logistic(double t) {
  return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

// log S(sqrt(lambda)) for the squared exponential (optionally times lambda).
double log_se_spectral(double log_alpha, double log_rho, double rho, double lambda,
                       bool derivative) {
  double out = kHalfLog2Pi + 2.0 * log_alpha + log_rho - 0.5 * rho * rho * lambda;
  if (derivative) out += std::log(lambda);
  return out;
}

void place(std::vector<std::string>& names, const std::string& stem, Index n) {
  for (Index i = 0; i < n; ++i) names.push_back(stem + "[" + std::to_string(i + 1) + "]");
}

}  // namespace

std::string to_string(ModelVariant variant) {
  switch (variant) {
    case ModelVariant::pcHSGP: return "pcHSGP";
    case ModelVariant::pdHSGP: return "pdHSGP";
    case ModelVariant::sHSGP: return "sHSGP";
    case ModelVariant::sdHSGP: return "sdHSGP";
  }
  return "unknown";
}

std::optional<ModelVariant> parse_variant(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "pchsgp") return ModelVariant::pcHSGP;
  if (lower == "pdhsgp") return ModelVariant::pdHSGP;
  if (lower == "shsgp") return ModelVariant::sHSGP;
  if (lower == "sdhsgp") return ModelVariant::sdHSGP;
  return std::nullopt;
}

bool has_f_block(ModelVariant v) { return v != ModelVariant::sdHSGP; }
bool has_g_block(ModelVariant v) { return v != ModelVariant::sHSGP; }
bool ties_length_scale(ModelVariant v) { return v != ModelVariant::pcHSGP; }

PriorSet PriorSet::pcgp_simulation() {
  PriorSet p;
  p.f = {{1.0, 0.05}, {3.0, 0.25}, {1.0, 0.25}};
  p.g = {{0.7, 0.05}, {2.0, 0.25}, {0.75, 0.25}};
  return p;
}

PriorSet PriorSet::dgp_simulation() {
  PriorSet p;
  p.f = {{1.0, 0.05}, {30.0, 2.5}, {10.0, 2.5}};
  p.g = {{1.0, 0.05}, {3.0, 0.25}, {1.0, 0.25}};
  return p;
}

PriorSet PriorSet::case_study() {
  PriorSet p;
  p.f = {{0.3, 0.1}, {0.5, 0.1}, {0.5, 0.1}};
  p.g = p.f;
  // standardised outputs: an unbounded mean centred at zero
  p.mean = {0.0, 1.0};
  p.mean_positive = false;
  p.latent = LatentPriorKind::Uniform;
  p.uniform_lo = 0.0;
  p.uniform_hi = 1.0;
  return p;
}

Index LatentModelSpec::D() const {
  if (y_f.size() > 0) return y_f.cols();
  return y_g.cols();
}

LatentModelSpec make_latent_spec(ModelVariant variant, VectorXd x_tilde, MatrixXd y_f,
                                 MatrixXd y_g, PriorSet priors, double s, Index M,
                                 double c) {
  if (x_tilde.size() < 1) throw InvalidInput("x_tilde is empty");
  LatentModelSpec spec;
  spec.variant = variant;
  spec.basis = make_basis(x_tilde.minCoeff(), x_tilde.maxCoeff(), c, M);
  spec.priors = priors;
  spec.s = s;
  spec.x_tilde = std::move(x_tilde);
  spec.y_f = has_f_block(variant) ? std::move(y_f) : MatrixXd();
  spec.y_g = has_g_block(variant) ? std::move(y_g) : MatrixXd();
  validate(spec);
  return spec;
}

void validate(const LatentModelSpec& spec) {
  const Index n = spec.N();
  if (n < 1) throw ShapeError("model needs N >= 1");
  if (!(spec.s > 0.0)) throw InvalidInput("measurement SD s must be positive");
  if (has_f_block(spec.variant) && (spec.y_f.rows() != n || spec.y_f.cols() < 1))
    throw ShapeError(to_string(spec.variant) + " needs y_f with N rows");
  if (has_g_block(spec.variant) && (spec.y_g.rows() != n || spec.y_g.cols() < 1))
    throw ShapeError(to_string(spec.variant) + " needs y_g with N rows");
  if (has_f_block(spec.variant) && has_g_block(spec.variant) &&
      spec.y_f.cols() != spec.y_g.cols())
    throw ShapeError("y_f and y_g must have the same number of columns");
  if (!spec.x_tilde.allFinite() || (spec.y_f.size() && !spec.y_f.allFinite()) ||
      (spec.y_g.size() && !spec.y_g.allFinite()))
    throw InvalidInput("model data must be finite");
  if (!(spec.priors.lkj_eta > 0.0)) throw InvalidInput("LKJ shape must be positive");
  if (spec.priors.latent == LatentPriorKind::Uniform &&
      !(spec.priors.uniform_hi > spec.priors.uniform_lo))
    throw InvalidInput("uniform latent prior needs hi > lo");
  if (spec.basis.M < 1) throw ShapeError("basis needs M >= 1");
}

ParameterLayout make_layout(ModelVariant variant, Index N, Index D, Index M) {
  ParameterLayout l;
  Index next = 0;
  auto take = [&](Slot& s, Index size) {
    s.offset = next;
    s.size = size;
    next += size;
  };
  take(l.x, N);
  const bool f = has_f_block(variant), g = has_g_block(variant);
  if (ties_length_scale(variant)) {
    take(l.rho, D);
  } else {
    take(l.rho_f, D);
    take(l.rho_g, D);
  }
  if (f) take(l.alpha_f, D);
  if (g) take(l.alpha_g, D);
  if (f) take(l.sigma_f, D);
  if (g) take(l.sigma_g, D);
  if (f) take(l.mu_f, D);
  if (g) take(l.mu_g, D);
  if (f) take(l.beta_f, M * D);
  if (g) take(l.beta_g, M * D);
  if (variant == ModelVariant::pcHSGP) {
    take(l.corr_f, corr_free_size(D));
    take(l.corr_g, corr_free_size(D));
  } else {
    take(l.corr, corr_free_size(D));
  }
  l.size = next;
  return l;
}

LatentModel::LatentModel(LatentModelSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  layout_ = make_layout(spec_.variant, spec_.N(), spec_.D(), spec_.M());
}

double LatentModel::evaluate(const VectorXd& theta, VectorXd* grad,
                             LogPosteriorTerms* terms_out, Index* clamped_out) const {
  const ParameterLayout& l = layout_;
  if (theta.size() != l.size)
    throw ShapeError("parameter vector has " + std::to_string(theta.size()) +
                     " entries, model needs " + std::to_string(l.size));
  if (!theta.allFinite()) {
    if (grad) grad->setZero(l.size);
    return -INFINITY;
  }
  const Index n = spec_.N(), d_count = spec_.D(), m = spec_.M();
  const PriorSet& pri = spec_.priors;
  const double s = spec_.s;
  if (grad) grad->setZero(l.size);
  LogPosteriorTerms t;

  // latent inputs and their measurement / range priors
  VectorXd x(n);
  const bool uniform = pri.latent == LatentPriorKind::Uniform;
  const double width = pri.uniform_hi - pri.uniform_lo;
  VectorXd sig;  // logistic(t) for the uniform case
  if (uniform) {
    sig.resize(n);
    for (Index i = 0; i < n; ++i) {
      sig(i) = logistic(theta(l.x.offset + i));
      x(i) = pri.uniform_lo + width * sig(i);
    }
  } else {
    x = theta.segment(l.x.offset, n);
  }
  VectorXd g_x = VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const double e = spec_.x_tilde(i) - x(i);
    t.latent_prior += -0.5 * e * e / (s * s) - std::log(s) - kHalfLog2Pi;
    g_x(i) += e / (s * s);
    if (uniform) {
      // log-Jacobian of the logistic map minus log(width) from the density
      t.latent_prior += std::log(sig(i)) + std::log1p(-sig(i));
    }
  }

  const PhiMatrix<double> phi = phi_with_derivative(spec_.basis, x, grad != nullptr);
  if (clamped_out) *clamped_out = phi.clamped;

  // length-scale / marginal SD / error SD priors on the log scale
  for (const PriorSlot& ps : hyper_slots(spec_, l)) {
    for (Index k = 0; k < ps.slot.size; ++k) {
      const double u = theta(ps.slot.offset + k);
      const double v = std::exp(u);
      t.hyper_prior += half_normal_log_density(v, ps.prior.loc, ps.prior.scale) + u;
      if (grad)
        (*grad)(ps.slot.offset + k) +=
            -(v - ps.prior.loc) / (ps.prior.scale * ps.prior.scale) * v + 1.0;
    }
  }

  // means
  for (const Slot* ms : {&l.mu_f, &l.mu_g}) {
    if (!ms->present()) continue;
    const double loc = pri.mean.loc, sc = pri.mean.scale;
    for (Index k = 0; k < ms->size; ++k) {
      const double u = theta(ms->offset + k);
      if (pri.mean_positive) {
        const double v = std::exp(u);
        t.mean_prior += half_normal_log_density(v, loc, sc) + u;
        if (grad) (*grad)(ms->offset + k) += -(v - loc) / (sc * sc) * v + 1.0;
      } else {
        const double z = (u - loc) / sc;
        t.mean_prior += -0.5 * z * z - std::log(sc) - kHalfLog2Pi;
        if (grad) (*grad)(ms->offset + k) += -z / sc;
      }
    }
  }

  // basis weights
  for (const Slot* bs : {&l.beta_f, &l.beta_g}) {
    if (!bs->present()) continue;
    const auto b = theta.segment(bs->offset, bs->size);
    t.beta_prior += -0.5 * b.squaredNorm() - static_cast<double>(bs->size) * kHalfLog2Pi;
    if (grad) grad->segment(bs->offset, bs->size) -= b;
  }

  // correlation factors
  const std::array<Slot, 2> cslots = corr_slots(l);
  std::array<MatrixXd, 2> chol;
  std::array<MatrixXd, 2> g_chol;
  for (int c = 0; c < 2; ++c) {
    if (!cslots[c].present()) continue;
    const CorrCholesky cc =
        corr_cholesky_constrain(theta.segment(cslots[c].offset, cslots[c].size), d_count);
    chol[c] = cc.lower;
    g_chol[c] = MatrixXd::Zero(d_count, d_count);
    if (!grad) t.corr_prior += lkj_cholesky_log_density(cc.lower, pri.lkj_eta) + cc.log_jacobian;
  }

  // output blocks
  const VectorXd& lambda = spec_.basis.eigenvalues;
  for (const BlockView& blk : blocks_of(spec_, l)) {
    const MatrixXd& y = *blk.y;
    const MatrixXd& a = chol[blk.corr_index];
    MatrixXd w(m, d_count);
    VectorXd rho(d_count), sigma(d_count), mu(d_count);
    for (Index d = 0; d < d_count; ++d) {
      const double log_rho = theta(blk.rho.offset + d);
      const double log_alpha = theta(blk.alpha.offset + d);
      rho(d) = std::exp(log_rho);
      sigma(d) = std::exp(theta(blk.sigma.offset + d));
      const double mu_raw = theta(blk.mu.offset + d);
      mu(d) = pri.mean_positive ? std::exp(mu_raw) : mu_raw;
      for (Index j = 0; j < m; ++j)
        w(j, d) = std::exp(0.5 * log_se_spectral(log_alpha, log_rho, rho(d), lambda(j),
                                                 blk.derivative));
    }
    const Eigen::Map<const MatrixXd> beta(theta.data() + blk.beta.offset, m, d_count);
    const MatrixXd wb = w.cwiseProduct(beta);
    MatrixXd u = phi.phi * wb;
    u.rowwise() += mu.transpose();
    const MatrixXd f = u * a.transpose();
    const MatrixXd e = y - f;
    double lik = -0.5 * static_cast<double>(n * d_count) * 2.0 * kHalfLog2Pi;
    for (Index d = 0; d < d_count; ++d)
      lik += -static_cast<double>(n) * std::log(sigma(d)) -
             0.5 * e.col(d).squaredNorm() / (sigma(d) * sigma(d));
    (blk.is_f ? t.likelihood_f : t.likelihood_g) += lik;
    if (!grad) continue;

    const VectorXd inv_var = sigma.array().square().inverse();
    const MatrixXd r = e * inv_var.asDiagonal();
    for (Index d = 0; d < d_count; ++d)
      (*grad)(blk.sigma.offset + d) +=
          -static_cast<double>(n) + e.col(d).squaredNorm() * inv_var(d);
    const MatrixXd g_u = r * a;
    g_chol[blk.corr_index].noalias() += r.transpose() * u;
    const Eigen::RowVectorXd g_mu = g_u.colwise().sum();
    const MatrixXd tmat = phi.phi.transpose() * g_u;  // M x D
    const MatrixXd g_wlog = beta.cwiseProduct(tmat).cwiseProduct(w);  // dl/dlog w
    Eigen::Map<MatrixXd> g_beta(grad->data() + blk.beta.offset, m, d_count);
    g_beta += w.cwiseProduct(tmat);
    for (Index d = 0; d < d_count; ++d) {
      (*grad)(blk.mu.offset + d) += pri.mean_positive ? g_mu(d) * mu(d) : g_mu(d);
      (*grad)(blk.alpha.offset + d) += g_wlog.col(d).sum();
      double g_rho = 0.0;
      for (Index j = 0; j < m; ++j)
        g_rho += g_wlog(j, d) * 0.5 * (1.0 - rho(d) * rho(d) * lambda(j));
      (*grad)(blk.rho.offset + d) += g_rho;
    }
    const MatrixXd g_phi = g_u * wb.transpose();  // N x M
    g_x += g_phi.cwiseProduct(phi.dphi).rowwise().sum();
  }

  if (grad) {
    for (int c = 0; c < 2; ++c) {
      if (!cslots[c].present()) continue;
      const VectorXd yc = theta.segment(cslots[c].offset, cslots[c].size);
      VectorXd gy(cslots[c].size);
      t.corr_prior +=
          corr_log_density_gradient(yc, d_count, pri.lkj_eta, g_chol[c], gy);
      grad->segment(cslots[c].offset, cslots[c].size) += gy;
    }
    if (uniform) {
      for (Index i = 0; i < n; ++i)
        (*grad)(l.x.offset + i) +=
            g_x(i) * width * sig(i) * (1.0 - sig(i)) + (1.0 - 2.0 * sig(i));
    } else {
      grad->segment(l.x.offset, n) += g_x;
    }
  }

  if (terms_out) *terms_out = t;
  const double total = t.total();
  if (!std::isfinite(total) || (grad && !grad->allFinite())) return -INFINITY;
  return total;
}

namespace {

void throw_for_terms(const LogPosteriorTerms& t) {
  const std::pair<const char*, double> items[] = {
      {"latent_prior", t.latent_prior}, {"likelihood_f", t.likelihood_f},
      {"likelihood_g", t.likelihood_g}, {"hyper_prior", t.hyper_prior},
      {"mean_prior", t.mean_prior},     {"beta_prior", t.beta_prior},
      {"corr_prior", t.corr_prior}};
  for (const auto& [name, value] : items)
    if (!std::isfinite(value)) throw NonFiniteDensity(name);
  throw NonFiniteDensity("gradient");
}

}  // namespace

double LatentModel::log_posterior(const VectorXd& theta) const {
  LogPosteriorTerms t;
  const double lp = evaluate(theta, nullptr, &t);
  if (!std::isfinite(lp)) throw_for_terms(t);
  return lp;
}

double LatentModel::log_posterior_gradient(const VectorXd& theta, VectorXd& grad) const {
  LogPosteriorTerms t;
  const double lp = evaluate(theta, &grad, &t);
  if (!std::isfinite(lp)) throw_for_terms(t);
  return lp;
}

LogPosteriorTerms LatentModel::terms(const VectorXd& theta) const {
  LogPosteriorTerms t;
  evaluate(theta, nullptr, &t);
  return t;
}

ParameterVector LatentModel::constrain(const VectorXd& theta) const {
  const ParameterLayout& l = layout_;
  if (theta.size() != l.size) throw ShapeError("parameter vector has wrong length");
  if (!theta.allFinite()) throw InvalidInput("non-finite unconstrained parameters");
  const Index n = spec_.N(), d = spec_.D(), m = spec_.M();
  const PriorSet& pri = spec_.priors;
  ParameterVector p;
  p.x = theta.segment(l.x.offset, n);
  if (pri.latent == LatentPriorKind::Uniform)
    for (Index i = 0; i < n; ++i)
      p.x(i) = pri.uniform_lo + (pri.uniform_hi - pri.uniform_lo) * logistic(p.x(i));
  auto pos = [&](const Slot& s) -> VectorXd {
    if (!s.present()) return {};
    return theta.segment(s.offset, s.size).array().exp();
  };
  p.rho = pos(l.rho);
  p.rho_f = pos(l.rho_f);
  p.rho_g = pos(l.rho_g);
  p.alpha_f = pos(l.alpha_f);
  p.alpha_g = pos(l.alpha_g);
  p.sigma_f = pos(l.sigma_f);
  p.sigma_g = pos(l.sigma_g);
  auto mean = [&](const Slot& s) -> VectorXd {
    if (!s.present()) return {};
    return pri.mean_positive ? pos(s) : VectorXd(theta.segment(s.offset, s.size));
  };
  p.mu_f = mean(l.mu_f);
  p.mu_g = mean(l.mu_g);
  auto beta = [&](const Slot& s) -> MatrixXd {
    if (!s.present()) return {};
    return Eigen::Map<const MatrixXd>(theta.data() + s.offset, m, d);
  };
  p.beta_f = beta(l.beta_f);
  p.beta_g = beta(l.beta_g);
  auto corr = [&](const Slot& s) -> MatrixXd {
    if (!s.present()) return {};
    return corr_cholesky_constrain(theta.segment(s.offset, s.size), d).lower;
  };
  p.corr = corr(l.corr);
  p.corr_f = corr(l.corr_f);
  p.corr_g = corr(l.corr_g);
  return p;
}

VectorXd LatentModel::unconstrain(const ParameterVector& p) const {
  const ParameterLayout& l = layout_;
  const Index n = spec_.N(), d = spec_.D(), m = spec_.M();
  const PriorSet& pri = spec_.priors;
  VectorXd theta(l.size);
  auto put = [&](const Slot& s, const VectorXd& v, const char* what) {
    if (!s.present()) return;
    if (v.size() != s.size) throw ShapeError(std::string("parameter '") + what + "' has wrong size");
    theta.segment(s.offset, s.size) = v;
  };
  if (p.x.size() != n) throw ShapeError("parameter 'x' has wrong size");
  VectorXd xu = p.x;
  if (pri.latent == LatentPriorKind::Uniform) {
    for (Index i = 0; i < n; ++i) {
      const double q = (p.x(i) - pri.uniform_lo) / (pri.uniform_hi - pri.uniform_lo);
      xu(i) = std::log(q) - std::log1p(-q);
    }
  }
  put(l.x, xu, "x");
  auto log_of = [](const VectorXd& v) -> VectorXd { return v.array().log(); };
  put(l.rho, log_of(p.rho), "rho");
  put(l.rho_f, log_of(p.rho_f), "rho_f");
  put(l.rho_g, log_of(p.rho_g), "rho_g");
  put(l.alpha_f, log_of(p.alpha_f), "alpha_f");
  put(l.alpha_g, log_of(p.alpha_g), "alpha_g");
  put(l.sigma_f, log_of(p.sigma_f), "sigma_f");
  put(l.sigma_g, log_of(p.sigma_g), "sigma_g");
  put(l.mu_f, pri.mean_positive ? log_of(p.mu_f) : p.mu_f, "mu_f");
  put(l.mu_g, pri.mean_positive ? log_of(p.mu_g) : p.mu_g, "mu_g");
  auto put_beta = [&](const Slot& s, const MatrixXd& b, const char* what) {
    if (!s.present()) return;
    if (b.rows() != m || b.cols() != d)
      throw ShapeError(std::string("parameter '") + what + "' has wrong shape");
    theta.segment(s.offset, s.size) = Eigen::Map<const VectorXd>(b.data(), b.size());
  };
  put_beta(l.beta_f, p.beta_f, "beta_f");
  put_beta(l.beta_g, p.beta_g, "beta_g");
  auto put_corr = [&](const Slot& s, const MatrixXd& a, const char* what) {
    if (!s.present()) return;
    if (a.rows() != d || a.cols() != d)
      throw ShapeError(std::string("parameter '") + what + "' has wrong shape");
    theta.segment(s.offset, s.size) = corr_cholesky_unconstrain(a);
  };
  put_corr(l.corr, p.corr, "corr");
  put_corr(l.corr_f, p.corr_f, "corr_f");
  put_corr(l.corr_g, p.corr_g, "corr_g");
  if (!theta.allFinite()) throw InvalidInput("parameters outside their support");
  return theta;
}

std::vector<std::string> LatentModel::parameter_names() const {
  const ParameterLayout& l = layout_;
  const Index d = spec_.D(), m = spec_.M();
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(l.size));
  place(names, "x", spec_.N());
  auto vec = [&](const Slot& s, const char* stem) {
    if (s.present()) place(names, stem, s.size);
  };
  vec(l.rho, "rho");
  vec(l.rho_f, "rho_f");
  vec(l.rho_g, "rho_g");
  vec(l.alpha_f, "alpha_f");
  vec(l.alpha_g, "alpha_g");
  vec(l.sigma_f, "sigma_f");
  vec(l.sigma_g, "sigma_g");
  vec(l.mu_f, "mu_f");
  vec(l.mu_g, "mu_g");
  auto mat = [&](const Slot& s, const char* stem) {
    if (!s.present()) return;
    for (Index c = 0; c < d; ++c)
      for (Index j = 0; j < m; ++j)
        names.push_back(std::string(stem) + "[" + std::to_string(j + 1) + "," +
                        std::to_string(c + 1) + "]");
  };
  mat(l.beta_f, "beta_f");
  mat(l.beta_g, "beta_g");
  auto corr = [&](const Slot& s, const char* stem) {
    if (!s.present()) return;
    for (Index r = 1; r < d; ++r)
      for (Index c = 0; c < r; ++c)
        names.push_back(std::string(stem) + "[" + std::to_string(r + 1) + "," +
                        std::to_string(c + 1) + "]");
  };
  corr(l.corr, "C");
  corr(l.corr_f, "Cf");
  corr(l.corr_g, "Cg");
  return names;
}

VectorXd LatentModel::constrained_values(const VectorXd& theta) const {
  const ParameterVector p = constrain(theta);
  VectorXd out(layout_.size);
  Index k = 0;
  auto push = [&](const VectorXd& v) {
    out.segment(k, v.size()) = v;
    k += v.size();
  };
  push(p.x);
  push(p.rho);
  push(p.rho_f);
  push(p.rho_g);
  push(p.alpha_f);
  push(p.alpha_g);
  push(p.sigma_f);
  push(p.sigma_g);
  push(p.mu_f);
  push(p.mu_g);
  for (const MatrixXd* b : {&p.beta_f, &p.beta_g})
    if (b->size()) push(Eigen::Map<const VectorXd>(b->data(), b->size()));
  for (const MatrixXd* a : {&p.corr, &p.corr_f, &p.corr_g}) {
    if (a->size() == 0) continue;
    const MatrixXd c = (*a) * a->transpose();
    for (Index r = 1; r < c.rows(); ++r)
      for (Index col = 0; col < r; ++col) out(k++) = c(r, col);
  }
  return out;
}

VectorXd LatentModel::initial_point(std::mt19937_64& rng, double jitter) const {
  std::uniform_real_distribution<double> unif(-jitter, jitter);
  VectorXd theta(layout_.size);
  for (Index i = 0; i < theta.size(); ++i) theta(i) = unif(rng);
  const PriorSet& pri = spec_.priors;
  for (Index i = 0; i < spec_.N(); ++i) {
    double xi = spec_.x_tilde(i);
    if (pri.latent == LatentPriorKind::Uniform) {
      const double width = pri.uniform_hi - pri.uniform_lo;
      double q = (xi - pri.uniform_lo) / width;
      q = std::clamp(q, 0.01, 0.99);
      xi = std::log(q) - std::log1p(-q);
    }
    theta(layout_.x.offset + i) = xi;
  }
  return theta;
}

double log_posterior(const LatentModelSpec& spec, const VectorXd& theta) {
  return LatentModel(spec).log_posterior(theta);
}

VectorXd log_posterior_gradient(const LatentModelSpec& spec, const VectorXd& theta) {
  VectorXd grad;
  LatentModel(spec).log_posterior_gradient(theta, grad);
  return grad;
}

ParameterVector constrain(const LatentModelSpec& spec, const VectorXd& theta) {
  return LatentModel(spec).constrain(theta);
}

VectorXd unconstrain(const LatentModelSpec& spec, const ParameterVector& params) {
  return LatentModel(spec).unconstrain(params);
}

ParameterVector draw_from_prior(const LatentModelSpec& spec, std::mt19937_64& rng) {
  validate(spec);
  const ParameterLayout l = make_layout(spec.variant, spec.N(), spec.D(), spec.M());
  const Index n = spec.N(), d = spec.D(), m = spec.M();
  const PriorSet& pri = spec.priors;
  std::normal_distribution<double> normal;
  ParameterVector p;
  p.x.resize(n);
  if (pri.latent == LatentPriorKind::Uniform) {
    std::uniform_real_distribution<double> unif(pri.uniform_lo, pri.uniform_hi);
    for (Index i = 0; i < n; ++i) p.x(i) = unif(rng);
  } else {
    for (Index i = 0; i < n; ++i) p.x(i) = spec.x_tilde(i) + spec.s * normal(rng);
  }
  auto half = [&](const Slot& s, const HalfNormalPrior& prior) -> VectorXd {
    if (!s.present()) return {};
    VectorXd v(s.size);
    for (Index k = 0; k < s.size; ++k) v(k) = sample_half_normal(prior.loc, prior.scale, rng);
    return v;
  };
  p.rho = half(l.rho, pri.f.rho);
  p.rho_f = half(l.rho_f, pri.f.rho);
  p.rho_g = half(l.rho_g, pri.g.rho);
  p.alpha_f = half(l.alpha_f, pri.f.alpha);
  p.alpha_g = half(l.alpha_g, pri.g.alpha);
  p.sigma_f = half(l.sigma_f, pri.f.sigma);
  p.sigma_g = half(l.sigma_g, pri.g.sigma);
  auto mean = [&](const Slot& s) -> VectorXd {
    if (!s.present()) return {};
    if (pri.mean_positive) return half(s, pri.mean);
    VectorXd v(s.size);
    for (Index k = 0; k < s.size; ++k) v(k) = pri.mean.loc + pri.mean.scale * normal(rng);
    return v;
  };
  p.mu_f = mean(l.mu_f);
  p.mu_g = mean(l.mu_g);
  auto beta = [&](const Slot& s) -> MatrixXd {
    if (!s.present()) return {};
    MatrixXd b(m, d);
    for (Index c = 0; c < d; ++c)
      for (Index j = 0; j < m; ++j) b(j, c) = normal(rng);
    return b;
  };
  p.beta_f = beta(l.beta_f);
  p.beta_g = beta(l.beta_g);
  auto corr = [&](const Slot& s) -> MatrixXd {
    if (!s.present()) return {};
    return sample_lkj(d, pri.lkj_eta, rng).llt().matrixL();
  };
  p.corr = corr(l.corr);
  p.corr_f = corr(l.corr_f);
  p.corr_g = corr(l.corr_g);
  return p;
}

std::pair<MatrixXd, MatrixXd> latent_functions(const LatentModelSpec& spec,
                                               const ParameterVector& p) {
  const Index d = spec.D();
  const MatrixXd phi = phi_matrix(spec.basis, p.x).phi;
  auto block = [&](bool derivative, const VectorXd& rho, const VectorXd& alpha,
                   const VectorXd& mu, const MatrixXd& beta, const MatrixXd& a) {
    MatrixXd u(spec.N(), d);
    for (Index c = 0; c < d; ++c) {
      const auto sd = SpectralDensity<double>::squared_exponential(
          alpha(c), rho(c), derivative ? 1 : 0, derivative ? 1 : 0);
      const VectorXd w = spectral_weights(spec.basis, sd).array().sqrt();
      u.col(c) = phi * w.cwiseProduct(beta.col(c));
      u.col(c).array() += mu(c);
    }
    return MatrixXd(u * a.transpose());
  };
  MatrixXd f, g;
  switch (spec.variant) {
    case ModelVariant::pcHSGP:
      f = block(false, p.rho_f, p.alpha_f, p.mu_f, p.beta_f, p.corr_f);
      g = block(false, p.rho_g, p.alpha_g, p.mu_g, p.beta_g, p.corr_g);
      break;
    case ModelVariant::pdHSGP:
      f = block(false, p.rho, p.alpha_f, p.mu_f, p.beta_f, p.corr);
      g = block(true, p.rho, p.alpha_g, p.mu_g, p.beta_g, p.corr);
      break;
    case ModelVariant::sHSGP:
      f = block(false, p.rho, p.alpha_f, p.mu_f, p.beta_f, p.corr);
      break;
    case ModelVariant::sdHSGP:
      g = block(true, p.rho, p.alpha_g, p.mu_g, p.beta_g, p.corr);
      break;
  }
  return {f, g};
}

std::pair<MatrixXd, MatrixXd> simulate_outputs(const LatentModelSpec& spec,
                                               const ParameterVector& p,
                                               std::mt19937_64& rng) {
  auto [f, g] = latent_functions(spec, p);
  std::normal_distribution<double> normal;
  auto noisy = [&](MatrixXd& y, const VectorXd& sigma) {
    for (Index c = 0; c < y.cols(); ++c)
      for (Index i = 0; i < y.rows(); ++i) y(i, c) += sigma(c) * normal(rng);
  };
  if (f.size()) noisy(f, p.sigma_f);
  if (g.size()) noisy(g, p.sigma_g);
  return {f, g};
}

double gaussian_log_density(const MatrixXd& cov, double mu, const VectorXd& y) {
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericallySingular("covariance is not positive definite");
  const VectorXd r = (y.array() - mu).matrix();
  const VectorXd z = llt.matrixL().solve(r);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * z.squaredNorm() - 0.5 * log_det -
         static_cast<double>(y.size()) * kHalfLog2Pi;
}

double hsgp_log_marginal_likelihood(const Basis& basis, const SpectralDensity<double>& sd,
                                    double mu, double sigma, const VectorXd& xs,
                                    const VectorXd& y) {
  MatrixXd cov = approx_gram(basis, sd, xs);
  cov.diagonal().array() += sigma * sigma;
  return gaussian_log_density(cov, mu, y);
}

double exact_log_marginal_likelihood(const Kernel& kernel, double mu, double sigma,
                                     const VectorXd& xs, const VectorXd& y) {
  MatrixXd cov = gram_matrix(kernel, xs);
  cov.diagonal().array() += sigma * sigma;
  return gaussian_log_density(cov, mu, y);
}

}  // namespace lhsgp
