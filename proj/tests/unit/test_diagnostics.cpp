#include <gtest/gtest.h>

#include <random>

#include "lhsgp/diagnostics.hpp"

namespace lhsgp {
namespace {

Eigen::MatrixXd iid_normal(Eigen::Index n, Eigen::Index chains, std::uint64_t seed,
                           double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd out(n, chains);
  for (Eigen::Index k = 0; k < out.size(); ++k) out.data()[k] = n01(rng) + shift;
  return out;
}

Eigen::MatrixXd ar1(Eigen::Index n, Eigen::Index chains, double phi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd out(n, chains);
  for (Eigen::Index c = 0; c < chains; ++c) {
    double x = n01(rng) / std::sqrt(1 - phi * phi);
    for (Eigen::Index i = 0; i < n; ++i) {
      x = phi * x + n01(rng);
      out(i, c) = x;
    }
  }
  return out;
}

TEST(Diagnostics, RhatIid) {
  const auto r = rhat(iid_normal(1000, 4, 1));
  ASSERT_TRUE(r);
  EXPECT_GE(*r, 0.999);
  EXPECT_LE(*r, 1.01);
}

TEST(Diagnostics, RhatDisjointChains) {
  Eigen::MatrixXd chains(1000, 2);
  chains.col(0) = iid_normal(1000, 1, 2, -10.0);
  chains.col(1) = iid_normal(1000, 1, 3, 10.0);
  const auto r = rhat(chains);
  ASSERT_TRUE(r);
  EXPECT_GT(*r, 1.5);
}

TEST(Diagnostics, SplitRhatDetectsTrendInOneChain) {
  Eigen::MatrixXd chain = iid_normal(1000, 1, 4);
  chain.col(0) += Eigen::VectorXd::LinSpaced(1000, 0.0, 6.0);
  EXPECT_GT(*rhat(chain), 1.1);
}

TEST(Diagnostics, UndefinedCases) {
  EXPECT_FALSE(rhat(Eigen::MatrixXd::Constant(100, 2, 3.0)));
  EXPECT_FALSE(bulk_ess(Eigen::MatrixXd::Constant(100, 2, 3.0)));
  EXPECT_FALSE(tail_ess(Eigen::MatrixXd::Constant(100, 2, 3.0)));
  EXPECT_FALSE(rhat(iid_normal(7, 1, 5)));  // 3 draws per half
  EXPECT_TRUE(rhat(iid_normal(8, 1, 5)));
  Eigen::MatrixXd bad = iid_normal(100, 1, 5);
  bad(3, 0) = NAN;
  EXPECT_FALSE(bulk_ess(bad));
}

TEST(Diagnostics, EssMatchesAr1Theory) {
  for (double phi : {0.0, 0.5, 0.9, -0.3}) {
    const Eigen::Index n = 20000;
    const Eigen::MatrixXd chains = ar1(n, 4, phi, 7);
    const double theory = 4.0 * n * (1 - phi) / (1 + phi);
    const auto ess = basic_ess(chains);
    ASSERT_TRUE(ess);
    EXPECT_NEAR(*ess / theory, 1.0, 0.1) << "phi=" << phi;
    EXPECT_NEAR(*bulk_ess(chains) / theory, 1.0, 0.12) << "phi=" << phi;
  }
}

TEST(Diagnostics, TailEssIid) {
  const auto t = tail_ess(iid_normal(2000, 2, 9));
  ASSERT_TRUE(t);
  EXPECT_GT(*t, 2500);
  EXPECT_LT(*t, 5500);
}

TEST(Diagnostics, RankNormalizeTies) {
  Eigen::MatrixXd x(4, 1);
  x << 1.0, 2.0, 2.0, 3.0;
  const Eigen::MatrixXd z = rank_normalize(x);
  EXPECT_EQ(z(1, 0), z(2, 0));
  EXPECT_NEAR(z(1, 0), 0.0, 1e-15);  // average rank 2.5 is the centre
  EXPECT_NEAR(z(0, 0), -z(3, 0), 1e-15);
}

TEST(Diagnostics, SplitChainsDropsMiddle) {
  Eigen::MatrixXd x(5, 1);
  x << 1, 2, 3, 4, 5;
  const Eigen::MatrixXd s = split_chains(x);
  ASSERT_EQ(s.rows(), 2);
  EXPECT_EQ(s(0, 1), 4.0);
}

TEST(Diagnostics, Quantile) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 5}, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 1.0), 4.0);
}

}  // namespace
}  // namespace lhsgp
