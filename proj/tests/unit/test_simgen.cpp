#include <gtest/gtest.h>

#include <cmath>

#include "lhsgp/errors.hpp"
#include "lhsgp/kernels.hpp"
#include "lhsgp/simgen.hpp"

namespace lhsgp {
namespace {

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  return (da * db).sum() / std::sqrt(da.square().sum() * db.square().sum());
}

TEST(Simgen, ShapesAndSortedInputs) {
  for (Process p : {Process::pcGP, Process::dGP}) {
    const SimDataset ds = generate(ScenarioConfig::make(p, 20, 5, 3));
    EXPECT_EQ(ds.N(), 20);
    EXPECT_EQ(ds.D(), 5);
    EXPECT_EQ(ds.y_g.rows(), 20);
    EXPECT_TRUE(std::is_sorted(ds.x_true.begin(), ds.x_true.end()));
    EXPECT_GT(ds.x_true.minCoeff(), 0.0);
    EXPECT_LT(ds.x_true.maxCoeff(), 10.0);
    EXPECT_TRUE(ds.y_f.allFinite() && ds.y_g.allFinite() && ds.x_tilde.allFinite());
    EXPECT_GT(ds.mu_f.minCoeff(), 0.0);
  }
}

TEST(Simgen, ZeroNoiseGivesLatentValues) {
  ScenarioConfig cfg = ScenarioConfig::make(Process::pcGP, 15, 3, 11);
  cfg.fixed_sigma = 0.0;
  cfg.s = 0.0;
  const SimDataset ds = generate(cfg);
  EXPECT_EQ(ds.y_f, ds.f);
  EXPECT_EQ(ds.y_g, ds.g);
  EXPECT_EQ(ds.x_tilde, ds.x_true);
}

TEST(Simgen, DerivativeScaleRatio) {
  const SimDataset ds = generate(ScenarioConfig::make(Process::dGP, 20, 10, 5));
  for (Eigen::Index d = 0; d < 10; ++d) {
    EXPECT_EQ(ds.alpha_f(d) / ds.alpha_g(d), 10.0);
    EXPECT_DOUBLE_EQ(ds.sigma_f(d), 10.0 * ds.sigma_g(d));
  }
  EXPECT_EQ(ds.rho.size(), 10);
  EXPECT_EQ(ds.C.rows(), 10);
}

TEST(Simgen, FlatFunctionLimit) {
  const int reps = 2000;
  Eigen::VectorXd a(reps), b(reps);
  for (int r = 0; r < reps; ++r) {
    ScenarioConfig cfg = ScenarioConfig::make(Process::pcGP, 2, 1, 1000 + r);
    cfg.x_true = Eigen::Vector2d(1.0, 9.0);
    cfg.fixed_rho = 1e6;
    cfg.fixed_alpha = 3.0;
    cfg.fixed_sigma = 0.1;
    const SimDataset ds = generate(cfg);
    a(r) = ds.y_f(0, 0);
    b(r) = ds.y_f(1, 0);
  }
  // 9 / 9.01 in the limit
  EXPECT_GT(correlation(a, b), 0.99);
}

TEST(Simgen, ExactMarginalCovariance) {
  const int reps = 20000;
  const Eigen::VectorXd x = (Eigen::VectorXd(5) << 1.0, 2.0, 2.5, 6.0, 8.0).finished();
  const double rho = 1.2, alpha = 2.0, sigma = 0.5, mu = 1.5;
  Eigen::MatrixXd ys(reps, 5);
  for (int r = 0; r < reps; ++r) {
    ScenarioConfig cfg = ScenarioConfig::make(Process::pcGP, 5, 1, 50000 + r);
    cfg.x_true = x;
    cfg.fixed_rho = rho;
    cfg.fixed_alpha = alpha;
    cfg.fixed_sigma = sigma;
    cfg.fixed_mean = mu;
    ys.row(r) = generate(cfg).y_f.col(0).transpose();
  }
  Eigen::MatrixXd expected =
      gram_matrix(KernelSpec<double>::squared_exponential(alpha, rho), x);
  expected.diagonal().array() += sigma * sigma;
  const Eigen::MatrixXd centred = ys.rowwise() - Eigen::RowVectorXd::Constant(5, mu);
  const Eigen::MatrixXd cov = centred.transpose() * centred / reps;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const double se = std::sqrt((expected(i, i) * expected(j, j) +
                                   expected(i, j) * expected(i, j)) / reps);
      EXPECT_NEAR(cov(i, j), expected(i, j), 3.0 * se) << i << "," << j;
    }
  }
}

TEST(Simgen, DerivativeBlockMatchesFiniteDifferences) {
  const int n = 101;
  ScenarioConfig cfg = ScenarioConfig::make(Process::dGP, n, 1, 9);
  cfg.x_true = Eigen::VectorXd::LinSpaced(n, 0.0, 10.0);
  cfg.fixed_sigma = 0.0;
  const SimDataset ds = generate(cfg);
  const double h = 0.1;
  Eigen::VectorXd fd(n - 2), g(n - 2);
  for (int i = 1; i < n - 1; ++i) {
    fd(i - 1) = (ds.y_f(i + 1, 0) - ds.y_f(i - 1, 0)) / (2 * h);
    g(i - 1) = ds.y_g(i, 0);
  }
  EXPECT_GT(correlation(fd, g), 0.99);
}

TEST(Simgen, Deterministic) {
  for (Process p : {Process::pcGP, Process::dGP}) {
    const SimDataset a = generate(ScenarioConfig::make(p, 12, 4, 77));
    const SimDataset b = generate(ScenarioConfig::make(p, 12, 4, 77));
    EXPECT_EQ(a.y_f, b.y_f);
    EXPECT_EQ(a.y_g, b.y_g);
    EXPECT_EQ(a.x_tilde, b.x_tilde);
    EXPECT_EQ(a.truth(), b.truth());
    const SimDataset c = generate(ScenarioConfig::make(p, 12, 4, 78));
    EXPECT_NE(a.y_f, c.y_f);
  }
}

TEST(Simgen, TruthNames) {
  const SimDataset pc = generate(ScenarioConfig::make(Process::pcGP, 4, 3, 1));
  const auto t = pc.truth();
  EXPECT_EQ(t.at("x[4]"), pc.x_true(3));
  EXPECT_EQ(t.at("rho_g[2]"), pc.rho_g(1));
  EXPECT_EQ(t.at("Cf[3,1]"), pc.C_f(2, 0));
  EXPECT_EQ(t.count("rho[1]"), 0u);
  EXPECT_EQ(t.size(), 4u + 8u * 3u + 2u * 3u);
  const auto td = generate(ScenarioConfig::make(Process::dGP, 4, 3, 1)).truth();
  EXPECT_EQ(td.count("rho[3]"), 1u);
  EXPECT_EQ(td.count("C[2,1]"), 1u);
}

TEST(Simgen, RejectsBadConfig) {
  EXPECT_THROW(generate(ScenarioConfig::make(Process::pcGP, 1, 2, 0)), InvalidInput);
  EXPECT_THROW(generate(ScenarioConfig::make(Process::pcGP, 5, 0, 0)), InvalidInput);
  ScenarioConfig cfg = ScenarioConfig::make(Process::dGP, 5, 2, 0);
  cfg.scale_lambda = 0.0;
  EXPECT_THROW(generate(cfg), InvalidInput);
  EXPECT_EQ(parse_process("PCGP"), Process::pcGP);
  EXPECT_FALSE(parse_process("gp").has_value());
}

}  // namespace
}  // namespace lhsgp
