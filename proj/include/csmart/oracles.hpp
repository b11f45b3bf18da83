#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "csmart/sandwich.hpp"
#include "csmart/simgen.hpp"

namespace csmart {

/// Slow reference implementations, independent of the engine's assembly
/// path; used by tests and the `validate` CLI command.

struct OracleReport {
  std::string label;
  double engine_value = 0.0;
  double oracle_value = 0.0;
  double abs_discrepancy = 0.0;
  double rel_discrepancy = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// From-scratch dense assembly of the sandwich covariance: explicit CS
/// matrices, dense inverses, explicit leverage inverses. Test scale only.
Eigen::MatrixXd dense_sandwich(const FitResult& fit, const FsaConfig& fsa);

struct PmlSolution {
  double mu = 0.0;
  double eta = 0.0;   // single covariate, 0 if p = 0
  double sigma2 = 1.0;
  double rho = 0.0;
  bool converged = false;
};

/// Numerically maximizes the weighted Gaussian log-likelihood over
/// (mu, eta, sigma^2, rho in [0, kRhoMax]) by multi-start Nelder-Mead.
/// Requires a single-regimen, equal-m dataset with p <= 1.
PmlSolution constrained_pml(const TrialDataset& ds, EmbeddedAI ai,
                            const WeightEngine& engine);

/// Simulates the two-pathway mixture and estimates pooled mean/variance and
/// the within-pathway-centered ICC matching the conversion identities.
RegimenMoments mixture_moment_mc(double p, double mu1, double mu2, double s1,
                                 double s2, double rho1, double rho2,
                                 long draws, std::uint64_t seed,
                                 int cluster_size = 2);

/// The bundled oracle checks behind `csmart validate`.
std::vector<OracleReport> run_validation_suite(std::uint64_t seed = 12345);

}  // namespace csmart
