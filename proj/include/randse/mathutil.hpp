#pragma once

#include <cstdint>

namespace randse {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile, refined to near machine precision.
/// Requires 0 < p < 1.
double normal_quantile(double p);

/// Fast rational approximation of the normal quantile (~1e-9 relative),
/// used on the sampling hot path. Requires 0 < p < 1.
double normal_quantile_fast(double p);

/// FNV-1a over a byte string; used to fingerprint scenario configs.
std::uint64_t fnv1a64(const void* data, std::size_t len);

}  // namespace randse
