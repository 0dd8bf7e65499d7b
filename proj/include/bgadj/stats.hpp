#pragma once

// Scalar distribution functions: standard normal pdf/cdf/quantile,
// chi-square quantile via the regularized incomplete gamma, and the
// one-sample Kolmogorov-Smirnov test against the standard normal.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bgadj {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

namespace detail {

// Rational approximation for the standard normal quantile (Acklam),
// good to ~1e-9; refined below to full double precision.
inline double norm_quantile_approx(double q) {
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
  if (q < plow) {
    const double u = std::sqrt(-2.0 * std::log(q));
    return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
           ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  if (q > 1.0 - plow) {
    const double u = std::sqrt(-2.0 * std::log(1.0 - q));
    return -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
           ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  const double u = q - 0.5;
  const double r = u * u;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Inverse of norm_cdf on (0,1); one Halley step on the rational
/// approximation gives full double accuracy in the tails.
inline double norm_quantile(double q) {
  if (!(q > 0.0 && q < 1.0))
    throw std::domain_error("norm_quantile: q must lie strictly in (0,1)");
  double x = detail::norm_quantile_approx(q);
  const double e = norm_cdf(x) - q;
  const double u = e / norm_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

namespace detail {

// Regularized lower incomplete gamma P(a, x): series for x < a+1,
// continued fraction (modified Lentz) otherwise.
inline double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

}  // namespace detail

/// CDF of the chi-square distribution with `dim` degrees of freedom.
inline double chi2_cdf(unsigned dim, double x) {
  return detail::gamma_p(0.5 * dim, 0.5 * x);
}

/// Quantile of the chi-square distribution, solved by bisection on the
/// regularized incomplete gamma.
inline double chi2_quantile(unsigned dim, double q) {
  if (dim == 0) throw std::invalid_argument("chi2_quantile: dim must be positive");
  if (!(q > 0.0 && q < 1.0))
    throw std::domain_error("chi2_quantile: q must lie strictly in (0,1)");
  double hi = dim + 10.0;
  while (chi2_cdf(dim, hi) < q) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(dim, mid) < q)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

namespace detail {

// Kolmogorov tail sum Q(lambda) = 2 sum_j (-1)^{j-1} exp(-2 j^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-18) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace detail

/// One-sample KS test of `samples` against the standard normal CDF.
/// The p-value uses the asymptotic Kolmogorov series with Stephens'
/// finite-sample argument.
inline KsResult ks_test(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("ks_test: empty sample");
  for (double v : samples)
    if (!std::isfinite(v)) throw std::invalid_argument("ks_test: non-finite sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = norm_cdf(samples[i]);
    d = std::max(d, std::abs((i + 1.0) / n - f));
    d = std::max(d, std::abs(f - i / n));
  }
  KsResult r;
  r.statistic = d;
  const double sn = std::sqrt(n);
  r.p_value = detail::kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
  return r;
}

/// KS distance only (no p-value), for pre-sorted data.
inline double ks_statistic_sorted(const std::vector<double>& sorted) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = norm_cdf(sorted[i]);
    d = std::max(d, std::abs((i + 1.0) / n - f));
    d = std::max(d, std::abs(f - i / n));
  }
  return d;
}

}  // namespace bgadj
