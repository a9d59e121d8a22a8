#pragma once

#include <cstdint>
#include <vector>

namespace didkit {

/// Quantile of the standard normal distribution (inverse CDF).
/// Rational approximation refined by one Halley step; absolute error is far
/// below 1e-9 over (0, 1). Throws std::domain_error outside (0, 1).
double normal_quantile(double p);

/// Standard normal CDF.
double normal_cdf(double x);

/// Upper tail of the chi-squared distribution with k degrees of freedom,
/// P(X > x). k >= 1, x >= 0.
double chi_squared_sf(double x, int k);

/// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Compensated (Kahan) accumulator for order-stable tabulations.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

/// Mean of v (0 when empty).
double mean(const std::vector<double>& v);

/// Sample standard deviation (n-1 denominator; 0 when n < 2).
double sample_sd(const std::vector<double>& v);

/// Linear-interpolation quantile of a sample, q in [0, 1].
double quantile(std::vector<double> v, double q);

/// 64-bit FNV-1a over a byte buffer; used to fingerprint input files.
std::uint64_t fnv1a64(const void* data, std::size_t len);

}  // namespace didkit
