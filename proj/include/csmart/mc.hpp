#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "csmart/inference.hpp"
#include "csmart/simgen.hpp"

namespace csmart {

/// One estimator configuration evaluated per replication.
struct Variant {
  std::string name;
  FsaConfig fsa;
  WeightMode weight_mode = WeightMode::known;
  CovStructure structure = CovStructure::exchangeable;
  VarianceMode variance_mode = VarianceMode::per_regimen;
  IccMode icc_mode = IccMode::per_regimen;
};

/// The four named presets: minimal, on-the-shelf, proposed, full.
std::vector<Variant> default_variants(WeightMode mode = WeightMode::known);

/// Per replication: the point estimate plus one (se, covered) pair per
/// variant. ok=false marks a failed fit.
struct Replication {
  bool ok = false;
  double estimate = 0.0;
  std::vector<double> se;
  std::vector<bool> covered;
  std::vector<bool> variant_ok;
};

struct ExperimentRow {
  DesignPoint point;
  std::string variant;
  int replications = 0;
  int failures = 0;         // fit failures at this point
  int variant_failures = 0; // variance failures for this variant
  double avg_estimate = 0.0;
  double bias = 0.0;
  double sd_estimate = 0.0;
  double rmse = 0.0;
  double avg_se = 0.0;      // sqrt of mean estimated variance
  double coverage = 0.0;    // successful replications only
  double coverage_all = 0.0;  // failures counted as non-covering
  double mc_se_of_coverage = 0.0;
  bool flagged = false;     // > 5% failures
};

/// Runs the grid; deterministic given base_seed at any worker count.
/// true_value is the target of the contrast (coverage reference).
std::vector<ExperimentRow> run_experiment(const SimulationDesign& design,
                                          const std::vector<Variant>& variants,
                                          EmbeddedAI lhs, EmbeddedAI rhs,
                                          double true_value, int workers = 1,
                                          double level = 0.95);

/// Raw per-replication results for one design point (same determinism).
std::vector<Replication> run_point(const DesignPoint& point, int replications,
                                   std::uint64_t base_seed,
                                   std::uint64_t point_index,
                                   const std::vector<Variant>& variants,
                                   EmbeddedAI lhs, EmbeddedAI rhs,
                                   double true_value, int workers,
                                   double level = 0.95,
                                   bool adjust_covariates = false);

/// nozero = proportion of CIs excluding 0; bootse = sqrt(mean variance).
std::pair<double, double> nozero_and_bootse(
    const std::vector<Replication>& reps, int variant, int n, int p, int q,
    Reference reference, double level = 0.95);

/// Table-2-layout CSV (fixed 6-decimal formatting).
void emit_table(const std::vector<ExperimentRow>& rows, std::ostream& out);
void emit_table_text(const std::vector<ExperimentRow>& rows,
                     std::ostream& out);

}  // namespace csmart
