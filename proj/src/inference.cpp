#include "csmart/inference.hpp"

#include <cmath>
#include <sstream>

#include "csmart/special.hpp"

namespace csmart {

Contrast pairwise_contrast(EmbeddedAI ai, EmbeddedAI aip, int dim) {
  Contrast c;
  std::ostringstream label;
  label << "(" << ai.a1 << "," << ai.a2 << ") - (" << aip.a1 << "," << aip.a2
        << ")";
  c.label = label.str();
  c.coefficients = Eigen::VectorXd::Zero(dim);
  c.coefficients[1] = ai.a1 - aip.a1;
  c.coefficients[2] = ai.a2 - aip.a2;
  c.coefficients[3] = ai.a1 * ai.a2 - aip.a1 * aip.a2;
  return c;
}

std::vector<Contrast> all_pairwise_contrasts(int dim) {
  const std::array<std::pair<int, int>, 6> pairs = {
      {{0, 3}, {1, 2}, {0, 1}, {0, 2}, {1, 3}, {2, 3}}};
  std::vector<Contrast> out;
  out.reserve(6);
  for (const auto& [a, b] : pairs) {
    out.push_back(pairwise_contrast(kRegimens[a], kRegimens[b], dim));
  }
  return out;
}

Interval interval(double estimate, double variance, int n, int p, int q,
                  Reference reference, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("confidence level must be in (0, 1)");
  }
  Interval out;
  const double se = variance > 0.0 ? std::sqrt(variance) : 0.0;
  if (se == 0.0) {
    out.low = out.high = estimate;
    out.p_value = estimate == 0.0 ? 1.0 : 0.0;
    return out;
  }
  double crit;
  const double tail = 0.5 * (1.0 + level);
  if (reference == Reference::t) {
    const int df = n - p - q;
    if (df < 1) {
      throw SingularityError("t reference needs n > p + q");
    }
    crit = student_t_quantile(tail, df);
    out.p_value = 2.0 * (1.0 - student_t_cdf(std::fabs(estimate) / se, df));
  } else {
    crit = normal_quantile(tail);
    out.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(estimate) / se));
  }
  out.low = estimate - crit * se;
  out.high = estimate + crit * se;
  return out;
}

namespace {

InferenceRow make_row(const std::string& label, double estimate,
                      double variance, int n, int p, int q,
                      Reference reference, double level) {
  InferenceRow row;
  row.label = label;
  row.estimate = estimate;
  row.se = variance > 0.0 ? std::sqrt(variance) : 0.0;
  const Interval ci = interval(estimate, variance, n, p, q, reference, level);
  row.ci_low = ci.low;
  row.ci_high = ci.high;
  row.p_value = ci.p_value;
  return row;
}

std::string parameter_label(int k, const FitResult& fit) {
  static const char* causal[] = {"intercept", "a1", "a2", "a1:a2"};
  if (k < 4) return causal[k];
  const int j = k - 4;
  if (j < static_cast<int>(fit.data.covariate_names.size()))
    return fit.data.covariate_names[j];
  return "x" + std::to_string(j + 1);
}

}  // namespace

InferenceReport report(const FitResult& fit, const SandwichResult& sandwich,
                       const std::vector<Contrast>& contrasts, double level) {
  const int n = fit.data.n();
  const int p = fit.model.p;
  const int q = MeanModel::q;
  const Eigen::VectorXd theta = fit.theta();

  InferenceReport out;
  out.fsa = sandwich.fsa;
  out.level = level;
  out.df = n - p - q;
  for (int k = 0; k < fit.model.dim(); ++k) {
    out.parameters.push_back(make_row(parameter_label(k, fit), theta[k],
                                      sandwich.sigma(k, k), n, p, q,
                                      sandwich.fsa.reference, level));
  }
  for (const auto& c : contrasts) {
    if (c.coefficients.size() != fit.model.dim()) {
      throw std::invalid_argument("contrast '" + c.label +
                                  "' has wrong length");
    }
    const double est = c.coefficients.dot(theta);
    const double var =
        c.coefficients.dot(sandwich.sigma * c.coefficients);
    out.contrasts.push_back(make_row(c.label, est, var, n, p, q,
                                     sandwich.fsa.reference, level));
  }
  return out;
}

}  // namespace csmart
