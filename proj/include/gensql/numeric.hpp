#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace gensql {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// log(sum(exp(xs))), max-shifted. Empty input and all -inf both yield -inf.
inline double log_sum_exp(const std::vector<double>& xs) {
  if (xs.empty()) return kNegInf;
  double m = *std::max_element(xs.begin(), xs.end());
  if (m == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - m);
  return m + std::log(sum);
}

inline double log_mean_exp(const std::vector<double>& xs) {
  if (xs.empty()) return kNegInf;
  double lse = log_sum_exp(xs);
  if (lse == kNegInf) return kNegInf;
  return lse - std::log(static_cast<double>(xs.size()));
}

inline double normal_pdf(double x, double mean, double stddev) {
  double z = (x - mean) / stddev;
  return std::exp(-0.5 * z * z) / (stddev * 2.5066282746310005024);
}

inline double normal_log_pdf(double x, double mean, double stddev) {
  double z = (x - mean) / stddev;
  return -0.5 * z * z - std::log(stddev) - 0.91893853320467274178;  // log sqrt(2 pi)
}

// Phi(z) via erfc for accuracy in the tails.
inline double normal_cdf(double x, double mean = 0.0, double stddev = 1.0) {
  double z = (x - mean) / (stddev * 1.4142135623730950488);
  return 0.5 * std::erfc(-z);
}

// Inverse standard normal CDF: Acklam's rational approximation refined with
// one Halley step against erfc, good to ~1e-13 over (0,1).
inline double normal_quantile(double p) {
  if (p <= 0.0) return kNegInf;
  if (p >= 1.0) return kInf;
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double e = 0.5 * std::erfc(-x / 1.4142135623730950488) - p;
  double u = e * 2.5066282746310005024 * std::exp(x * x / 2.0);
  x = x - u / (1 + x * u / 2);
  return x;
}

inline bool approx_equal(double a, double b, double tol) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::fabs(a - b) <= tol;
}

inline bool approx_equal_rel(double a, double b, double rel_tol) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= rel_tol * scale;
}

}  // namespace gensql
