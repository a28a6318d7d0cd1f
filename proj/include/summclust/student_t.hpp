#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace summclust {

namespace detail {

// Continued fraction for the regularized incomplete beta function
// (modified Lentz). Converges quickly for x < (a+1)/(a+b+2).
inline double beta_cont_frac(double a, double b, double x) {
  constexpr double kEps = 1e-15;
  constexpr double kFpMin = 1e-300;
  constexpr int kMaxIter = 4000;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("incomplete_beta: a and b must be positive");
  }
  if (x < 0.0 || x > 1.0) {
    throw std::invalid_argument("incomplete_beta: x outside [0,1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::beta_cont_frac(a, b, x) / a;
  }
  return 1.0 - front * detail::beta_cont_frac(b, a, 1.0 - x) / b;
}

// P(|T| >= |t|) for T ~ t(dof). Computed directly as I_x(dof/2, 1/2) with
// x = dof/(dof + t^2), which avoids cancellation in the tails.
inline double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("student_t: dof must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  const double x = dof / (dof + t * t);
  return incomplete_beta(0.5 * dof, 0.5, x);
}

inline double student_t_cdf(double t, double dof) {
  const double p = student_t_two_sided_p(t, dof);
  return t >= 0.0 ? 1.0 - 0.5 * p : 0.5 * p;
}

// Quantile by bisection on the CDF; prob in (0, 1).
inline double student_t_quantile(double prob, double dof) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw std::invalid_argument("student_t_quantile: prob outside (0,1)");
  }
  if (prob == 0.5) return 0.0;
  if (prob < 0.5) return -student_t_quantile(1.0 - prob, dof);
  double lo = 0.0;
  double hi = 1.0;
  while (student_t_cdf(hi, dof) < prob) {
    hi *= 2.0;
    if (hi > 1e300) return std::numeric_limits<double>::infinity();
  }
  for (int iter = 0; iter < 200 && (hi - lo) > 1e-14 * (1.0 + hi); ++iter) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, dof) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Two-sided critical value at significance alpha, e.g. alpha = .05 -> 97.5%.
inline double student_t_critical(double dof, double alpha = 0.05) {
  return student_t_quantile(1.0 - 0.5 * alpha, dof);
}

}  // namespace summclust
