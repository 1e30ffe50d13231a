#pragma once

#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>

namespace bailout {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

// Upper tail 1 - Phi(x), accurate far into the tail.
inline double normal_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

// Inverse CDF. Returns -inf at 0 and +inf at 1.
inline double normal_quantile(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

// Bivariate standard normal CDF P(X < h, Y < k) with correlation r.
double bivariate_normal_cdf(double h, double k, double r);

}  // namespace bailout
