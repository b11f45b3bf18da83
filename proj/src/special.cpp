#include "csmart/special.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace csmart {

namespace {

// Modified Lentz continued fraction for the incomplete beta function.
double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::domain_error("reg_incomplete_beta: a, b must be positive");
  }
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

namespace {

double invert_cdf(double p, double (*cdf)(double, double), double aux) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("quantile requires p in (0, 1)");
  }
  double lo = -1.0, hi = 1.0;
  while (cdf(lo, aux) > p) lo *= 2.0;
  while (cdf(hi, aux) < p) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid, aux) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13 * std::max(1.0, std::fabs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

double normal_cdf_aux(double x, double) { return normal_cdf(x); }

}  // namespace

double normal_quantile(double p) { return invert_cdf(p, normal_cdf_aux, 0.0); }

double student_t_cdf(double x, double df) {
  if (!(df > 0.0)) throw std::domain_error("student_t_cdf: df must be > 0");
  if (x == 0.0) return 0.5;
  // Keep the beta argument at or below 1/2 so neither branch loses x^2
  // to rounding (df/(df + x^2) flattens to 1 for |x| < sqrt(eps * df)).
  const double x2 = x * x;
  double central;  // P(|T| <= |x|)
  if (x2 > df) {
    central = 1.0 - reg_incomplete_beta(0.5 * df, 0.5, df / (df + x2));
  } else {
    central = reg_incomplete_beta(0.5, 0.5 * df, x2 / (df + x2));
  }
  return x > 0.0 ? 0.5 + 0.5 * central : 0.5 - 0.5 * central;
}

double student_t_quantile(double p, double df) {
  if (!(df > 0.0)) {
    throw std::domain_error("student_t_quantile: df must be > 0");
  }
  return invert_cdf(p, student_t_cdf, df);
}

}  // namespace csmart
