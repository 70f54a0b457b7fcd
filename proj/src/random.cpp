#include "lhsgp/random.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>

#include "lhsgp/errors.hpp"

namespace lhsgp {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::mt19937_64 make_stream_rng(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

double normal_quantile(double p) {
  static const boost::math::normal_distribution<double> unit;
  return boost::math::quantile(unit, p);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double sample_half_normal(double loc, double scale, std::mt19937_64& rng) {
  if (!(scale > 0.0)) throw InvalidInput("half-normal scale must be positive");
  // v = loc - scale * Phi^-1(u), u ~ U(0, Phi(loc / scale)) keeps v > 0
  const double upper = normal_cdf(loc / scale);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = 0.0;
  while (u <= 0.0) u = unif(rng) * upper;
  const double v = loc - scale * normal_quantile(u);
  return v > 0.0 ? v : std::nextafter(0.0, 1.0);
}

double half_normal_log_density(double value, double loc, double scale) {
  if (!(value > 0.0)) return -INFINITY;
  const double z = (value - loc) / scale;
  return -0.5 * z * z - std::log(scale) - 0.5 * std::log(2.0 * std::numbers::pi) -
         std::log(normal_cdf(loc / scale));
}

}  // namespace lhsgp
