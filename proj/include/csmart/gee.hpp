#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <vector>

#include "csmart/covariance.hpp"
#include "csmart/trial_data.hpp"
#include "csmart/weights.hpp"

namespace csmart {

/// Linear marginal mean model
///   mu(a1, a2, x) = b0 + b1 a1 + b2 a2 + b3 a1 a2 + eta' (x - centering).
struct MeanModel {
  static constexpr int q = 4;
  int p = 0;
  Eigen::Vector4d beta = Eigen::Vector4d::Zero();
  Eigen::VectorXd eta;        // length p
  Eigen::VectorXd centering;  // length p, subtracted covariate means

  double mu(EmbeddedAI ai, const Eigen::VectorXd& x_raw) const;
  int dim() const { return q + p; }
};

/// (1, a1, a2, a1*a2, x_centered). All members of a cluster share the row.
Eigen::VectorXd build_design_row(EmbeddedAI ai,
                                 const Eigen::VectorXd& x_centered);

struct FitConfig {
  CovStructure structure = CovStructure::exchangeable;
  VarianceMode variance_mode = VarianceMode::per_regimen;
  IccMode icc_mode = IccMode::per_regimen;
  WeightMode weight_mode = WeightMode::known;
  double tol = 1e-8;
  int max_iter = 100;
  // Optional nonsingular reparameterization of the causal design block;
  // the causal part of each design row becomes causal_transform * (1,a1,a2,a1a2).
  Eigen::Matrix4d causal_transform = Eigen::Matrix4d::Identity();
};

struct FitResult {
  MeanModel model;
  WorkingCovariance covariance;
  WeightEngine weight_engine;
  FitConfig config;
  TrialDataset data;
  int iterations = 0;
  bool converged = false;
  Eigen::MatrixXd bread;  // B-hat, (q+p) x (q+p)
  // residuals[i][k]: residual vector of cluster i under regimen kRegimens[k],
  // present iff the cluster is consistent with that regimen.
  std::vector<std::array<std::optional<Eigen::VectorXd>, 4>> residuals;
  std::vector<std::string> diagnostics;

  Eigen::VectorXd theta() const;  // (beta, eta)
  /// Design row for cluster i under regimen ai (centered covariates,
  /// causal transform applied).
  Eigen::VectorXd design_row(int i, EmbeddedAI ai) const;
};

/// Solves the weighted-and-replicated normal equations at fixed working
/// covariance. Throws SingularityError naming the offending parameter
/// subspace when the normal matrix is rank deficient.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> solve_wls(
    const TrialDataset& ds, const WeightEngine& engine,
    const WorkingCovariance& cov, const Eigen::VectorXd& centering,
    const Eigen::Matrix4d& causal_transform);

/// Moment estimates of (sigma^2, rho) per regimen from weighted residuals,
/// with the requested pooling; rho is floored at 0 and clamped at kRhoMax.
WorkingCovariance update_covariance(
    const TrialDataset& ds, const WeightEngine& engine,
    const std::vector<std::array<std::optional<Eigen::VectorXd>, 4>>&
        residuals,
    CovStructure structure, VarianceMode variance_mode, IccMode icc_mode,
    std::vector<std::string>* diagnostics = nullptr);

/// Alternates solve_wls and update_covariance from (sigma^2, rho) = (1, 0)
/// until the parameter change drops below config.tol.
FitResult fit(const TrialDataset& ds, const FitConfig& config = {});

}  // namespace csmart
