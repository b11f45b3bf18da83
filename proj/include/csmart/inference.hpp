#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "csmart/sandwich.hpp"

namespace csmart {

/// Linear functional c'(beta, eta) of the model parameters.
struct Contrast {
  std::string label;
  Eigen::VectorXd coefficients;  // length q+p
};

/// Contrast for mu(ai) - mu(ai'): (0, a1-a1', a2-a2', a1a2-a1'a2', 0...).
Contrast pairwise_contrast(EmbeddedAI ai, EmbeddedAI aip, int dim);

/// The 6 pairwise regimen comparisons in fixed reporting order.
std::vector<Contrast> all_pairwise_contrasts(int dim);

struct Interval {
  double low = 0.0;
  double high = 0.0;
  double p_value = 1.0;
};

/// Two-sided CI and p-value; t reference uses df = n - p - q.
Interval interval(double estimate, double variance, int n, int p, int q,
                  Reference reference, double level = 0.95);

struct InferenceRow {
  std::string label;
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
};

struct InferenceReport {
  std::vector<InferenceRow> parameters;  // unit contrasts, beta then eta
  std::vector<InferenceRow> contrasts;
  FsaConfig fsa;
  double level = 0.95;
  int df = 0;  // n - p - q, used when reference is t
};

InferenceReport report(const FitResult& fit, const SandwichResult& sandwich,
                       const std::vector<Contrast>& contrasts,
                       double level = 0.95);

}  // namespace csmart
