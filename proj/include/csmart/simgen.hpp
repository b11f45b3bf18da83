#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "csmart/rng.hpp"
#include "csmart/trial_data.hpp"

namespace csmart {

/// Inputs for generating one synthetic cSMART. The conditional outcome law
/// splits each regimen's marginal mean by response status (shift omega) and
/// draws member outcomes from a compound-symmetry normal whose parameters
/// invert the pathway-to-regimen moment identities.
struct GenerativeSpec {
  int n = 10;
  int m_lo = 5;
  int m_hi = 5;  // cluster sizes uniform on [m_lo, m_hi]
  Eigen::Vector4d beta_true = Eigen::Vector4d(30.0, 1.0, 0.75, 0.5);
  Eigen::VectorXd eta_true;  // length p (may be 0)
  double sd_y = 7.0;         // marginal sd(Y)
  double icc = 0.1;          // marginal ICC of the covariate-free residual
  std::array<double, 2> response_rate = {0.5, 0.5};  // kappa(a1=+1), kappa(a1=-1)
  std::array<double, 4> response_effect{};           // omega per regimen
  std::uint64_t seed = 0;

  int p() const { return static_cast<int>(eta_true.size()); }
  double kappa(int a1) const { return response_rate[a1 == 1 ? 0 : 1]; }
  /// sd_y^2 minus the covariate variance contribution eta'eta.
  double sigma2_marginal() const;
};

/// Throws FeasibilityError naming the violated constraint.
void validate_spec(const GenerativeSpec& spec);

struct RegimenMoments {
  double mu = 0.0;
  double sigma2 = 0.0;
  double rho = 0.0;
};

/// Pathway-mixture identities: mu = p mu1 + (1-p) mu2;
/// sigma2 = p s1 + (1-p) s2 + p(1-p)(mu1-mu2)^2;
/// rho = (p s1 rho1 + (1-p) s2 rho2) / sigma2.
RegimenMoments regimen_moments_from_pathways(double p, double mu1, double mu2,
                                             double s1, double s2,
                                             double rho1, double rho2);

struct ConditionalMoments {
  double xi = 0.0;    // E(Y | X, R)
  double tau2 = 0.0;  // var
  double rho_c = 0.0; // ICC
};

/// Response-conditional moments for one regimen:
/// xi = mu + (r ? (1-kappa) : -kappa) omega;
/// tau2 = sigma2_marg - kappa(1-kappa) omega^2;
/// rho_c = (icc sigma2_marg - kappa(1-kappa) omega^2) / tau2.
ConditionalMoments conditional_moments(const GenerativeSpec& spec,
                                       EmbeddedAI ai,
                                       const Eigen::VectorXd& x, int r);

/// One synthetic trial; deterministic given (spec.seed, replication) with
/// per-cluster substreams.
TrialDataset generate_trial(const GenerativeSpec& spec,
                            std::uint64_t replication = 0);

/// One cell of the simulation grid.
struct DesignPoint {
  int n = 10;
  int m = 5;
  double delta = 0.5;    // standardized effect size, sd_y = 3.5/delta
  double icc = 0.1;
  double kappa = 0.5;    // response rate, both arms
  double cor_xy = 0.5;   // cor(X, Y) for a single standard-normal covariate
};

/// sd_y = 3.5/delta; eta = cor_xy * sd_y; omega = 0.25 sd_y per regimen.
GenerativeSpec spec_from_design(const DesignPoint& pt, std::uint64_t seed = 0);

struct SimulationDesign {
  std::vector<int> n = {10};
  std::vector<int> m = {5};
  std::vector<double> delta = {0.5};
  std::vector<double> icc = {0.1};
  std::vector<double> kappa = {0.5};
  std::vector<double> cor_xy = {0.5};
  int replications = 2000;
  std::uint64_t base_seed = 0;
  // When false the fitted mean model is the marginal one: generated
  // covariates still shape the outcomes but are dropped before fitting.
  bool adjust_covariates = false;

  std::vector<DesignPoint> points() const;  // full cross product, fixed order
};

// JSON (de)serialization mirroring the field lists.
std::string to_json(const GenerativeSpec& spec);
GenerativeSpec spec_from_json(const std::string& text);
std::string to_json(const SimulationDesign& design);
SimulationDesign design_from_json(const std::string& text);
SimulationDesign load_design(const std::string& path);

}  // namespace csmart
