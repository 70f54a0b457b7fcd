#pragma once

#include <cstdint>
#include <random>

namespace lhsgp {

/// Independent generator for stream `stream` of a run seeded with `seed`.
/// Streams are derived by hashing (seed, stream), so results do not depend on
/// the order in which streams are created or consumed.
std::mt19937_64 make_stream_rng(std::uint64_t seed, std::uint64_t stream);

/// Normal(loc, scale^2) truncated to (0, inf), drawn by inverse CDF.
double sample_half_normal(double loc, double scale, std::mt19937_64& rng);

/// log density of Normal(loc, scale^2) truncated to (0, inf) at value > 0.
double half_normal_log_density(double value, double loc, double scale);

double normal_quantile(double p);
double normal_cdf(double z);

}  // namespace lhsgp
