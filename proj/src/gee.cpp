#include "csmart/gee.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace csmart {

double MeanModel::mu(EmbeddedAI ai, const Eigen::VectorXd& x_raw) const {
  double value = beta[0] + beta[1] * ai.a1 + beta[2] * ai.a2 +
                 beta[3] * ai.a1 * ai.a2;
  if (p > 0) value += eta.dot(x_raw - centering);
  return value;
}

Eigen::VectorXd build_design_row(EmbeddedAI ai,
                                 const Eigen::VectorXd& x_centered) {
  Eigen::VectorXd row(4 + x_centered.size());
  row[0] = 1.0;
  row[1] = ai.a1;
  row[2] = ai.a2;
  row[3] = ai.a1 * ai.a2;
  row.tail(x_centered.size()) = x_centered;
  return row;
}

Eigen::VectorXd FitResult::theta() const {
  Eigen::VectorXd out(model.dim());
  out.head(4) = model.beta;
  if (model.p > 0) out.tail(model.p) = model.eta;
  return out;
}

Eigen::VectorXd FitResult::design_row(int i, EmbeddedAI ai) const {
  const auto& c = data.clusters[i];
  Eigen::Vector4d causal(1.0, double(ai.a1), double(ai.a2),
                         double(ai.a1 * ai.a2));
  Eigen::VectorXd row(model.dim());
  row.head(4) = config.causal_transform * causal;
  if (model.p > 0) row.tail(model.p) = c.x - model.centering;
  return row;
}

namespace {

Eigen::VectorXd design_row_for(const ClusterRecord& c, EmbeddedAI ai,
                               const Eigen::VectorXd& centering,
                               const Eigen::Matrix4d& transform) {
  Eigen::Vector4d causal(1.0, double(ai.a1), double(ai.a2),
                         double(ai.a1 * ai.a2));
  Eigen::VectorXd row(4 + centering.size());
  row.head(4) = transform * causal;
  if (centering.size() > 0) row.tail(centering.size()) = c.x - centering;
  return row;
}

std::string parameter_name(int k, const TrialDataset& ds) {
  static const char* causal[] = {"intercept", "a1", "a2", "a1:a2"};
  if (k < 4) return causal[k];
  const int j = k - 4;
  if (j < static_cast<int>(ds.covariate_names.size()))
    return ds.covariate_names[j];
  return "x" + std::to_string(j + 1);
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::MatrixXd> solve_wls(
    const TrialDataset& ds, const WeightEngine& engine,
    const WorkingCovariance& cov, const Eigen::VectorXd& centering,
    const Eigen::Matrix4d& causal_transform) {
  const int dim = 4 + static_cast<int>(centering.size());
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  for (const auto& c : ds.clusters) {
    const int m = static_cast<int>(c.size());
    for (const auto ai : kRegimens) {
      if (!consistency_indicator(c, ai)) continue;
      const double w = weight(engine, c, ai);
      const double s2 = cov.sigma2_of(ai);
      const double rho = cov.rho_of(ai);
      const Eigen::VectorXd d = design_row_for(c, ai, centering,
                                               causal_transform);
      const double quad = cs_ones_quad(m, s2, rho);
      normal.noalias() += (w * quad) * d * d.transpose();
      rhs.noalias() += (w * cs_ones_dot(s2, rho, c.y)) * d;
    }
  }
  normal = 0.5 * (normal + normal.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normal);
  const auto& evals = es.eigenvalues();
  const double max_ev = evals[dim - 1];
  if (max_ev <= 0.0 || evals[0] <= 1e-12 * max_ev) {
    Eigen::VectorXd null_dir = es.eigenvectors().col(0);
    int worst = 0;
    null_dir.cwiseAbs().maxCoeff(&worst);
    throw SingularityError(
        "normal matrix is rank deficient; parameter '" +
        parameter_name(worst, ds) + "' is not identified by the design");
  }
  Eigen::VectorXd theta = es.eigenvectors() *
                          (es.eigenvectors().transpose() * rhs).cwiseQuotient(
                              evals.matrix());
  return {theta, normal};
}

WorkingCovariance update_covariance(
    const TrialDataset& ds, const WeightEngine& engine,
    const std::vector<std::array<std::optional<Eigen::VectorXd>, 4>>&
        residuals,
    CovStructure structure, VarianceMode variance_mode, IccMode icc_mode,
    std::vector<std::string>* diagnostics) {
  std::array<double, 4> sum_sq{}, sum_wm{}, sum_cross{}, sum_pair{};
  for (int i = 0; i < ds.n(); ++i) {
    const auto& c = ds.clusters[i];
    const double m = static_cast<double>(c.size());
    for (int k = 0; k < 4; ++k) {
      if (!residuals[i][k]) continue;
      const double w = weight(engine, c, kRegimens[k]);
      const Eigen::VectorXd& r = *residuals[i][k];
      const double sq = r.squaredNorm();
      const double total = r.sum();
      sum_sq[k] += w * sq;
      sum_wm[k] += w * m;
      sum_cross[k] += w * (total * total - sq);
      sum_pair[k] += w * m * (m - 1.0);
    }
  }

  WorkingCovariance cov;
  cov.structure = structure;
  cov.variance_mode = variance_mode;
  cov.icc_mode = icc_mode;

  const double floor_s2 = 1e-10;
  if (variance_mode == VarianceMode::homogeneous) {
    double num = 0.0, den = 0.0;
    for (int k = 0; k < 4; ++k) {
      num += sum_sq[k];
      den += sum_wm[k];
    }
    const double s2 = std::max(den > 0.0 ? num / den : 1.0, floor_s2);
    cov.sigma2 = {s2, s2, s2, s2};
  } else {
    for (int k = 0; k < 4; ++k) {
      if (sum_wm[k] <= 0.0) {
        throw ValidationError("no data for regimen index " +
                              std::to_string(k));
      }
      cov.sigma2[k] = std::max(sum_sq[k] / sum_wm[k], floor_s2);
    }
  }

  if (structure == CovStructure::independence) {
    cov.rho = {0.0, 0.0, 0.0, 0.0};
    return cov;
  }

  if (icc_mode == IccMode::shared) {
    double num = 0.0, den = 0.0;
    for (int k = 0; k < 4; ++k) {
      num += sum_cross[k];
      den += cov.sigma2[k] * sum_pair[k];
    }
    double rho = 0.0;
    if (den > 0.0) {
      rho = std::clamp(num / den, 0.0, kRhoMax);
    } else if (diagnostics) {
      diagnostics->push_back("all clusters have m_i = 1; shared rho set to 0");
    }
    cov.rho = {rho, rho, rho, rho};
  } else {
    for (int k = 0; k < 4; ++k) {
      const double den = cov.sigma2[k] * sum_pair[k];
      if (den > 0.0) {
        cov.rho[k] = std::clamp(sum_cross[k] / den, 0.0, kRhoMax);
      } else {
        cov.rho[k] = 0.0;
        if (diagnostics) {
          diagnostics->push_back(
              "regimen index " + std::to_string(k) +
              ": no cluster with m_i > 1; rho set to 0");
        }
      }
    }
  }
  return cov;
}

FitResult fit(const TrialDataset& ds, const FitConfig& config) {
  const auto report = validate_design(ds);
  if (!report.ok) {
    throw ValidationError("dataset failed validation:\n" + report.str());
  }

  FitResult result;
  result.config = config;
  result.data = ds;
  result.model.p = ds.p;
  result.weight_engine = config.weight_mode == WeightMode::known
                             ? known_weights()
                             : fit_weights(ds);

  Eigen::VectorXd centering = Eigen::VectorXd::Zero(ds.p);
  if (ds.p > 0) {
    for (const auto& c : ds.clusters) centering += c.x;
    centering /= ds.n();
  }
  result.model.centering = centering;

  WorkingCovariance cov;
  cov.structure = config.structure;
  cov.variance_mode = config.variance_mode;
  cov.icc_mode = config.icc_mode;

  const int dim = 4 + ds.p;
  Eigen::VectorXd theta_prev = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd theta;
  Eigen::MatrixXd normal;
  std::vector<std::array<std::optional<Eigen::VectorXd>, 4>> residuals(
      ds.n());

  auto refresh_residuals = [&](const Eigen::VectorXd& th) {
    for (int i = 0; i < ds.n(); ++i) {
      const auto& c = ds.clusters[i];
      for (int k = 0; k < 4; ++k) {
        if (consistency_indicator(c, kRegimens[k])) {
          const Eigen::VectorXd d = design_row_for(
              c, kRegimens[k], centering, config.causal_transform);
          residuals[i][k] =
              (c.y.array() - d.dot(th)).matrix().eval();
        } else {
          residuals[i][k].reset();
        }
      }
    }
  };

  double change = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= config.max_iter; ++iter) {
    std::tie(theta, normal) = solve_wls(ds, result.weight_engine, cov,
                                        centering, config.causal_transform);
    result.iterations = iter;
    change = (theta - theta_prev).cwiseAbs().maxCoeff();
    if (iter > 1 && change <= config.tol) {
      result.converged = true;
      break;
    }
    refresh_residuals(theta);
    cov = update_covariance(ds, result.weight_engine, residuals,
                            config.structure, config.variance_mode,
                            config.icc_mode, &result.diagnostics);
    theta_prev = theta;
  }
  if (!result.converged) {
    std::ostringstream msg;
    msg << "no convergence after " << config.max_iter
        << " iterations; last change " << change;
    throw ConvergenceError(msg.str());
  }

  refresh_residuals(theta);
  result.model.beta = theta.head(4);
  result.model.eta = theta.tail(ds.p);
  result.covariance = cov;  // covariance used in the final solve
  result.bread = normal / ds.n();
  result.residuals = std::move(residuals);
  return result;
}

}  // namespace csmart
