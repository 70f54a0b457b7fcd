#include "lhsgp/correlation.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

#include "lhsgp/errors.hpp"

namespace lhsgp {
namespace {

// log(1 - tanh(y)^2), stable for large |y|.
double log1m_tanh_sq(double y) {
  const double ay = std::abs(y);
  return 2.0 * (std::numbers::ln2 - ay - std::log1p(std::exp(-2.0 * ay)));
}

double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double beta_draw(double a, double b, std::mt19937_64& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

double lkj_diag_coefficient(Eigen::Index dim, Eigen::Index i, double eta) {
  return static_cast<double>(dim - i - 1) + 2.0 * eta - 2.0;
}

}  // namespace

CorrCholesky corr_cholesky_constrain(const Eigen::VectorXd& y, Eigen::Index dim) {
  if (y.size() != corr_free_size(dim))
    throw ShapeError("correlation parameter vector has wrong length");
  if (!y.allFinite()) throw InvalidInput("non-finite correlation parameters");
  CorrCholesky out;
  out.lower = Eigen::MatrixXd::Zero(dim, dim);
  if (dim == 0) return out;
  out.lower(0, 0) = 1.0;
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < dim; ++i) {
    double sum_sqs = 0.0;
    for (Eigen::Index j = 0; j < i; ++j, ++k) {
      const double z = std::tanh(y(k));
      out.log_jacobian += log1m_tanh_sq(y(k));
      double value = z;
      if (j > 0) {
        out.log_jacobian += 0.5 * std::log1p(-sum_sqs);
        value = z * std::sqrt(1.0 - sum_sqs);
      }
      out.lower(i, j) = value;
      sum_sqs += value * value;
    }
    out.lower(i, i) = std::sqrt(std::max(0.0, 1.0 - sum_sqs));
  }
  return out;
}

Eigen::VectorXd corr_cholesky_unconstrain(const Eigen::MatrixXd& lower) {
  const Eigen::Index dim = lower.rows();
  Eigen::VectorXd y(corr_free_size(dim));
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < dim; ++i) {
    double sum_sqs = 0.0;
    for (Eigen::Index j = 0; j < i; ++j, ++k) {
      const double z = j == 0 ? lower(i, j) : lower(i, j) / std::sqrt(1.0 - sum_sqs);
      y(k) = std::atanh(z);
      sum_sqs += lower(i, j) * lower(i, j);
    }
  }
  if (!y.allFinite()) throw InvalidInput("matrix is not a valid correlation Cholesky factor");
  return y;
}

double lkj_log_normalizer(Eigen::Index dim, double eta) {
  double out = 0.0;
  for (Eigen::Index k = 1; k < dim; ++k) {
    const double m = static_cast<double>(dim - k);
    const double shape = eta + (m - 1.0) / 2.0;
    out += (2.0 * eta - 2.0 + m) * m * std::numbers::ln2 + m * lbeta(shape, shape);
  }
  return out;
}

double lkj_cholesky_log_density(const Eigen::MatrixXd& lower, double eta) {
  const Eigen::Index dim = lower.rows();
  double out = -lkj_log_normalizer(dim, eta);
  for (Eigen::Index i = 1; i < dim; ++i)
    out += lkj_diag_coefficient(dim, i, eta) * std::log(lower(i, i));
  return out;
}

double corr_log_density_gradient(const Eigen::VectorXd& y, Eigen::Index dim,
                                 double eta, const Eigen::MatrixXd& grad_lower,
                                 Eigen::Ref<Eigen::VectorXd> grad_y) {
  const CorrCholesky cc = corr_cholesky_constrain(y, dim);
  const Eigen::MatrixXd& a = cc.lower;
  grad_y.setZero();
  Eigen::Index row_start = 0;
  for (Eigen::Index i = 1; i < dim; ++i) {
    // forward quantities for this row: running sum before each entry
    Eigen::VectorXd sum_before(i);
    double s = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      sum_before(j) = s;
      s += a(i, j) * a(i, j);
    }
    const double one_minus_final = 1.0 - s;
    // adjoint of the final running sum: diagonal entry and LKJ term
    double gs = grad_lower(i, i) * (-0.5 / a(i, i)) +
                lkj_diag_coefficient(dim, i, eta) * 0.5 * (-1.0 / one_minus_final);
    for (Eigen::Index j = i - 1; j >= 0; --j) {
      const Eigen::Index k = row_start + j;
      const double z = std::tanh(y(k));
      const double g_entry = grad_lower(i, j) + 2.0 * a(i, j) * gs;
      double gz;
      if (j > 0) {
        const double rem = 1.0 - sum_before(j);
        const double root = std::sqrt(rem);
        gz = g_entry * root;
        gs += g_entry * z * (-0.5 / root) - 0.5 / rem;
      } else {
        gz = g_entry;
      }
      grad_y(k) = gz * (1.0 - z * z) - 2.0 * z;
    }
    row_start += i;
  }
  return lkj_cholesky_log_density(a, eta) + cc.log_jacobian;
}

Eigen::MatrixXd sample_lkj(Eigen::Index dim, double eta, std::mt19937_64& rng) {
  if (dim < 1) throw InvalidInput("sample_lkj needs D >= 1");
  if (!(eta > 0.0)) throw InvalidInput("sample_lkj needs eta > 0");
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(dim, dim);
  if (dim == 1) return r;
  double beta = eta + (static_cast<double>(dim) - 2.0) / 2.0;
  const double r12 = 2.0 * beta_draw(beta, beta, rng) - 1.0;
  r(0, 1) = r(1, 0) = r12;
  std::normal_distribution<double> normal;
  for (Eigen::Index k = 2; k < dim; ++k) {
    beta -= 0.5;
    const double y = beta_draw(static_cast<double>(k) / 2.0, beta, rng);
    Eigen::VectorXd u(k);
    for (Eigen::Index i = 0; i < k; ++i) u(i) = normal(rng);
    u /= u.norm();
    const Eigen::VectorXd w = std::sqrt(y) * u;
    const Eigen::MatrixXd chol = r.topLeftCorner(k, k).llt().matrixL();
    const Eigen::VectorXd z = chol * w;
    r.block(0, k, k, 1) = z;
    r.block(k, 0, 1, k) = z.transpose();
  }
  return r;
}

}  // namespace lhsgp
