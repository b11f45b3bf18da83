#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>

#include "csmart/gee.hpp"

namespace csmart {

enum class Reference { normal, t };

/// Finite-sample adjustment switches. The nonnegative-rho floor (FSA1)
/// lives in the estimator and is always on.
struct FsaConfig {
  bool dof_scale = false;     // FSA3: n/(n-p-q) scaling
  bool bias_correct = false;  // FSA4: leverage-corrected residuals
  Reference reference = Reference::normal;  // FSA2 when t
};

FsaConfig preset_minimal();       // FSA1 only, normal reference
FsaConfig preset_on_the_shelf();  // FSA1+2+3
FsaConfig preset_proposed();      // FSA1+2+4
FsaConfig preset_full();          // FSA1+2+3+4

FsaConfig preset_by_name(const std::string& name);

struct SandwichResult {
  Eigen::MatrixXd sigma;          // Sigma-hat, (q+p) x (q+p)
  FsaConfig fsa;
  WeightMode weight_mode = WeightMode::known;
  Eigen::MatrixXd meat;           // M-hat or M-tilde (after any correction)
  Eigen::MatrixXd bread_inverse;  // B-hat^{-1}
  bool diag_clamped = false;      // negative diagonal clamped to 0
};

/// U_i = sum_ai I W D' V^{-1} r_{i,ai}; sums to ~0 over clusters.
Eigen::VectorXd cluster_score(const FitResult& fit, int i);

/// Sigma-hat = (1/n) B^{-1} M B^{-1}, M = P_n(U U').
SandwichResult sandwich_plain(const FitResult& fit);

/// Subtracts the score correction C F^{-1} C' from M for estimated weights.
SandwichResult sandwich_estimated_weights(const FitResult& fit);

/// Leverage-based bias correction: U~_i = (I - L_i)^{-1} U_i with
/// L_i = sum_ai I W D' V^{-1} D (nB)^{-1}. With estimated weights the score
/// correction is subtracted from M~ afterwards.
SandwichResult fsa4_bias_corrected(const FitResult& fit);

/// Multiplies every entry by n/(n-p-q); n <= p+q is an error.
SandwichResult fsa3_scale(SandwichResult sigma, int n, int p, int q);

/// Dispatch on an FsaConfig; estimated-weight fits always get the score
/// correction.
SandwichResult compute_sandwich(const FitResult& fit, const FsaConfig& fsa);

/// (C-hat, F-hat) of the estimated-weights correction.
std::pair<Eigen::MatrixXd, Eigen::Matrix2d> weight_correction_terms(
    const FitResult& fit);

}  // namespace csmart
