#include <gtest/gtest.h>

#include <random>

#include "lhsgp/spectral.hpp"
#include "support/oracles.hpp"

namespace lhsgp {
namespace {

using K = Kernel;
using SD = SpectralDensity<double>;

TEST(Spectral, SquaredExponentialValues) {
  EXPECT_NEAR(spectral_eval(SD::squared_exponential(1, 1), 0.0), 2.5066282746310002, 1e-14);
  EXPECT_NEAR(spectral_eval(SD::squared_exponential(1, 1), 1.0), 1.5203469010662807, 1e-14);
  EXPECT_NEAR(spectral_eval(SD::squared_exponential(1, 1, 1, 1), 1.0), 1.5203469010662807,
              1e-14);
  EXPECT_DOUBLE_EQ(spectral_eval(SD::squared_exponential(1, 1, 1, 1), 0.0), 0.0);
}

TEST(Spectral, MaternValue) {
  // 3 sqrt(3) / 4 at omega = 1, alpha = rho = 1
  EXPECT_NEAR(spectral_eval(SD::of(K::matern(1.5, 1, 1)), 1.0), 1.299038105676658, 1e-13);
}

TEST(Spectral, Admissibility) {
  EXPECT_THROW(spectral_eval(SD::squared_exponential(1, 1, 1, 0), 1.0), NotADensity);
  EXPECT_THROW(spectral_eval(SD::squared_exponential(1, 1, 2, 0), 1.0), NotADensity);
  EXPECT_THROW(spectral_eval(SD::of(K::matern(0.5, 1, 1, 1, 1)), 1.0), NotADensity);
  EXPECT_NO_THROW(spectral_eval(SD::squared_exponential(1, 1, 2, 2), 1.0));
}

TEST(Spectral, MatchesFourierTransformOfKernel) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> urho(0.3, 3.0), ualpha(0.2, 3.0), uw(0.1, 3.0);
  for (int t = 0; t < 10; ++t) {
    const double rho = urho(rng), alpha = ualpha(rng), w = uw(rng) / rho;
    const double var = alpha * alpha;
    struct Case {
      K kernel;
      std::function<double(double)> k;
      double cutoff;
    };
    const Case cases[] = {
        {K::squared_exponential(alpha, rho), [&](double r) { return var * testing::se(r, rho); },
         40 * rho},
        {K::squared_exponential(alpha, rho, 1, 1),
         [&](double r) { return var * testing::se_11(r, rho); }, 40 * rho},
        {K::matern(1.5, alpha, rho), [&](double r) { return var * testing::matern32(r, rho); },
         60 * rho},
        {K::matern(1.5, alpha, rho, 1, 1),
         [&](double r) { return var * testing::matern32_11(r, rho); }, 60 * rho},
        {K::matern(2.5, alpha, rho), [&](double r) { return var * testing::matern52(r, rho); },
         60 * rho},
        {K::matern(2.5, alpha, rho, 1, 1),
         [&](double r) { return var * testing::matern52_11(r, rho); }, 60 * rho},
    };
    for (const Case& c : cases) {
      const double oracle = testing::fourier_even(c.k, w, c.cutoff);
      const double closed = spectral_eval(SD::of(c.kernel), w);
      EXPECT_NEAR(closed / oracle, 1.0, 1e-5) << "rho=" << rho << " w=" << w;
    }
  }
}

}  // namespace
}  // namespace lhsgp
