#pragma once

#include <Eigen/Core>
#include <array>

#include "csmart/rng.hpp"
#include "csmart/trial_data.hpp"

namespace csmart {

enum class CovStructure { independence, exchangeable };
enum class VarianceMode { homogeneous, per_regimen };
enum class IccMode { shared, per_regimen };

/// Upper clamp for the intracluster correlation; CS(1) is singular.
inline constexpr double kRhoMax = 1.0 - 1e-8;

/// Per-regimen compound-symmetry working covariance sigma^2 CS(rho).
struct WorkingCovariance {
  CovStructure structure = CovStructure::exchangeable;
  VarianceMode variance_mode = VarianceMode::per_regimen;
  IccMode icc_mode = IccMode::per_regimen;
  std::array<double, 4> sigma2 = {1.0, 1.0, 1.0, 1.0};  // kRegimens order
  std::array<double, 4> rho = {0.0, 0.0, 0.0, 0.0};

  double sigma2_of(EmbeddedAI ai) const { return sigma2[regimen_index(ai)]; }
  double rho_of(EmbeddedAI ai) const { return rho[regimen_index(ai)]; }
};

// Closed-form CS algebra. CS_m(rho)^{-1} = I/(1-rho)
// - rho/((1-rho)(1+(m-1)rho)) J; det CS_m(rho) = (1-rho)^{m-1}(1+(m-1)rho).

/// (sigma^2 CS_m(rho))^{-1} v, O(m).
Eigen::VectorXd cs_inverse_apply(double sigma2, double rho,
                                 const Eigen::VectorXd& v);

/// 1' (sigma^2 CS_m(rho))^{-1} 1 = m / (sigma^2 (1+(m-1)rho)).
double cs_ones_quad(int m, double sigma2, double rho);

/// 1' (sigma^2 CS_m(rho))^{-1} v = sum(v) / (sigma^2 (1+(m-1)rho)).
double cs_ones_dot(double sigma2, double rho, const Eigen::VectorXd& v);

/// log det(sigma^2 CS_m(rho)).
double cs_log_det(int m, double sigma2, double rho);

/// One draw from N(mean 1_m, sigma^2 CS_m(rho)) via the shared-component
/// construction mean + sigma (sqrt(rho) z0 1 + sqrt(1-rho) z_j).
Eigen::VectorXd cs_cholesky_sample(int m, double sigma2, double rho,
                                   double mean, Rng& rng);

/// Dense sigma^2 CS_m(rho); test/oracle use only.
Eigen::MatrixXd cs_dense(int m, double sigma2, double rho);

}  // namespace csmart
