#pragma once

#include <initializer_list>
#include <string>

#include "csmart/gee.hpp"
#include "csmart/rng.hpp"
#include "csmart/simgen.hpp"
#include "csmart/trial_data.hpp"

namespace testutil {

using namespace csmart;

inline ClusterRecord cluster(const std::string& id, int a1, int r,
                             std::initializer_list<double> y, int a2 = 0,
                             std::initializer_list<double> x = {}) {
  ClusterRecord rec;
  rec.cluster_id = id;
  rec.a1 = a1;
  rec.r = r;
  if (r == 0) rec.a2 = a2;
  rec.y.resize(static_cast<Eigen::Index>(y.size()));
  Eigen::Index k = 0;
  for (double v : y) rec.y[k++] = v;
  rec.x.resize(static_cast<Eigen::Index>(x.size()));
  k = 0;
  for (double v : x) rec.x[k++] = v;
  return rec;
}

/// Smallest dataset with every regimen cell occupied: one responder and one
/// non-responder per (a1, a2) combination, no covariates.
inline TrialDataset minimal_complete(int m = 2) {
  TrialDataset ds;
  int id = 0;
  Rng rng(99);
  for (int a1 : {1, -1}) {
    for (int r : {1, 0}) {
      for (int a2 : {1, -1}) {
        if (r == 1 && a2 == -1) continue;  // responders enroll once
        ClusterRecord rec;
        rec.cluster_id = "c" + std::to_string(id++);
        rec.a1 = a1;
        rec.r = r;
        if (r == 0) rec.a2 = a2;
        rec.x.resize(0);
        rec.y.resize(m);
        for (int j = 0; j < m; ++j) rec.y[j] = 10.0 + 3.0 * rng.gaussian();
        ds.clusters.push_back(std::move(rec));
      }
    }
  }
  ds.p = 0;
  return ds;
}

/// Random dataset with all four regimen cells occupied; equal cluster size.
/// Retries until the weight fit is feasible for estimated mode.
inline TrialDataset random_trial(Rng& rng, int n, int m, int p = 0,
                                 bool responders = true) {
  for (;;) {
    TrialDataset ds;
    ds.p = p;
    for (int k = 0; k < p; ++k)
      ds.covariate_names.push_back("x" + std::to_string(k + 1));
    for (int i = 0; i < n; ++i) {
      ClusterRecord rec;
      rec.cluster_id = "c" + std::to_string(i + 1);
      rec.a1 = rng.coin_sign();
      rec.r = responders && rng.bernoulli(0.4) ? 1 : 0;
      if (rec.r == 0) rec.a2 = rng.coin_sign();
      rec.x.resize(p);
      for (int k = 0; k < p; ++k) rec.x[k] = rng.gaussian();
      rec.y.resize(m);
      const double base = 20.0 + 2.0 * rec.a1 + (rec.r ? 1.5 : -1.0) +
                          (rec.r == 0 ? 0.8 * *rec.a2 : 0.0);
      const double shared = 1.5 * rng.gaussian();
      for (int j = 0; j < m; ++j)
        rec.y[j] = base + shared + 2.5 * rng.gaussian() +
                   (p > 0 ? 1.2 * rec.x[0] : 0.0);
      ds.clusters.push_back(std::move(rec));
    }
    const auto report = validate_design(ds);
    if (!report.ok) continue;
    bool regimens_ok = true;
    for (int c : report.regimen_counts) regimens_ok = regimens_ok && c >= 2;
    if (!regimens_ok) continue;
    // Estimated weights need both stage-2 arms among non-responders.
    int nr_pos = 0, nr_neg = 0, arm_pos = 0, arm_neg = 0;
    for (const auto& rec : ds.clusters) {
      (rec.a1 == 1 ? arm_pos : arm_neg)++;
      if (rec.r == 0) (*rec.a2 == 1 ? nr_pos : nr_neg)++;
    }
    if (arm_pos == 0 || arm_neg == 0 || nr_pos == 0 || nr_neg == 0) continue;
    return ds;
  }
}

/// Causal-block reparameterization onto per-regimen means: row k of the
/// transform sends (1, a1, a2, a1 a2) to the indicator of kRegimens[k].
inline Eigen::Matrix4d regimen_mean_basis() {
  Eigen::Matrix4d t;
  for (int k = 0; k < 4; ++k) {
    const EmbeddedAI ai = kRegimens[k];
    t.row(k) << 1.0, ai.a1, ai.a2, ai.a1 * ai.a2;
  }
  return t / 4.0;
}

}  // namespace testutil
