#pragma once

namespace csmart {

/// Regularized incomplete beta function I_x(a, b), continued fraction
/// evaluation, ~1e-14 accuracy.
double reg_incomplete_beta(double a, double b, double x);

double normal_cdf(double x);
double normal_quantile(double p);

double student_t_cdf(double x, double df);
/// Inverse t CDF by bracketing bisection on the CDF; 1e-12 accuracy.
double student_t_quantile(double p, double df);

}  // namespace csmart
