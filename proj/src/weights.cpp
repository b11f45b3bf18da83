#include "csmart/weights.hpp"

#include <cmath>

namespace csmart {

WeightEngine known_weights() { return WeightEngine{}; }

WeightEngine fit_weights(const TrialDataset& ds) {
  int n_pos = 0;
  int nonresponders = 0;
  int a2_pos = 0;
  for (const auto& c : ds.clusters) {
    if (c.a1 == 1) ++n_pos;
    if (c.r == 0) {
      ++nonresponders;
      if (c.a2 && *c.a2 == 1) ++a2_pos;
    }
  }
  const int n = ds.n();
  if (n_pos == 0 || n_pos == n) {
    throw DegenerateWeightsError("empty first-stage arm: all clusters have A1=" +
                                 std::to_string(n_pos == 0 ? -1 : 1));
  }
  if (nonresponders == 0) {
    throw DegenerateWeightsError("no non-responders; stage-2 model undefined");
  }
  if (a2_pos == 0 || a2_pos == nonresponders) {
    throw DegenerateWeightsError("empty second-stage arm among non-responders");
  }
  WeightEngine engine;
  engine.mode = WeightMode::estimated;
  engine.p1_pos = static_cast<double>(n_pos) / n;
  engine.p2_pos = static_cast<double>(a2_pos) / nonresponders;
  engine.gamma[0] = std::log(engine.p1_pos / (1.0 - engine.p1_pos));
  engine.gamma[1] = std::log(engine.p2_pos / (1.0 - engine.p2_pos));
  return engine;
}

double weight(const WeightEngine& engine, const ClusterRecord& record,
              EmbeddedAI ai) {
  if (engine.mode == WeightMode::known) {
    return record.r == 1 ? 2.0 : 4.0;
  }
  const double p1 = engine.p1(record.a1);
  if (record.r == 1) return 1.0 / p1;
  return 1.0 / (p1 * engine.p2(*record.a2));
  (void)ai;
}

Eigen::Vector2d score_vector(const WeightEngine& engine,
                             const ClusterRecord& record) {
  if (engine.mode != WeightMode::estimated) {
    throw DegenerateWeightsError("score_vector requires estimated weights");
  }
  Eigen::Vector2d s;
  s[0] = (record.a1 == 1 ? 1.0 : 0.0) - engine.p1_pos;
  s[1] = record.r == 0
             ? ((record.a2 && *record.a2 == 1 ? 1.0 : 0.0) - engine.p2_pos)
             : 0.0;
  return s;
}

Eigen::Vector2d weight_gamma_derivative(const WeightEngine& engine,
                                        const ClusterRecord& record,
                                        EmbeddedAI ai) {
  if (engine.mode != WeightMode::estimated) {
    throw DegenerateWeightsError(
        "weight_gamma_derivative requires estimated weights");
  }
  // W = prod of 1/expit(a gamma); d/dgamma [1/expit(a g)] = -a (1-p)/p.
  const double w = weight(engine, record, ai);
  Eigen::Vector2d d;
  d[0] = -w * record.a1 * (1.0 - engine.p1(record.a1));
  d[1] = record.r == 0 ? -w * (*record.a2) * (1.0 - engine.p2(*record.a2))
                       : 0.0;
  return d;
}

}  // namespace csmart
