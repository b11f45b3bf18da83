#pragma once

#include <Eigen/Core>

#include "csmart/trial_data.hpp"

namespace csmart {

enum class WeightMode { known, estimated };

/// Inverse-probability-of-intervention weights. Known mode uses the design
/// probabilities (fair coins at both stages); estimated mode uses empirical
/// proportions from intercept-only logistic models for A1 and A2 | (R = 0),
/// with the stage-2 proportion pooled across first-stage arms.
struct WeightEngine {
  WeightMode mode = WeightMode::known;
  double p1_pos = 0.5;  // Pr(A1 = 1)
  double p2_pos = 0.5;  // Pr(A2 = 1 | R = 0)
  Eigen::Vector2d gamma = Eigen::Vector2d::Zero();  // (logit p1, logit p2)
  static constexpr int score_dim = 2;

  double p1(int a1) const { return a1 == 1 ? p1_pos : 1.0 - p1_pos; }
  double p2(int a2) const { return a2 == 1 ? p2_pos : 1.0 - p2_pos; }
};

WeightEngine known_weights();

/// Empirical proportions; throws DegenerateWeightsError on an empty A1 arm
/// or zero non-responders.
WeightEngine fit_weights(const TrialDataset& ds);

/// W_{i,a1,a2}. Callers must ensure consistency_indicator(record, ai) = 1.
/// Known mode: 2 for responders, 4 for non-responders.
double weight(const WeightEngine& engine, const ClusterRecord& record,
              EmbeddedAI ai);

/// Intercept-only logistic score contributions:
/// (I(A1=1) - p1, (1-R)(I(A2=1) - p2)). Sums to zero at the fitted gamma.
Eigen::Vector2d score_vector(const WeightEngine& engine,
                             const ClusterRecord& record);

/// Analytic dW/dgamma for the estimated-weights variance correction.
Eigen::Vector2d weight_gamma_derivative(const WeightEngine& engine,
                                        const ClusterRecord& record,
                                        EmbeddedAI ai);

}  // namespace csmart
