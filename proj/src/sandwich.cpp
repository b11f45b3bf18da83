#include "csmart/sandwich.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace csmart {

FsaConfig preset_minimal() { return {}; }

FsaConfig preset_on_the_shelf() {
  return {/*dof_scale=*/true, /*bias_correct=*/false, Reference::t};
}

FsaConfig preset_proposed() {
  return {/*dof_scale=*/false, /*bias_correct=*/true, Reference::t};
}

FsaConfig preset_full() {
  return {/*dof_scale=*/true, /*bias_correct=*/true, Reference::t};
}

FsaConfig preset_by_name(const std::string& name) {
  if (name == "minimal") return preset_minimal();
  if (name == "on-the-shelf") return preset_on_the_shelf();
  if (name == "proposed") return preset_proposed();
  if (name == "full") return preset_full();
  throw ParseError("unknown adjustment preset '" + name + "'");
}

namespace {

Eigen::MatrixXd invert_bread(const FitResult& fit) {
  const Eigen::MatrixXd& b = fit.bread;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  const auto& evals = es.eigenvalues();
  const double max_ev = evals[evals.size() - 1];
  if (max_ev <= 0.0 || evals[0] <= 1e-12 * max_ev) {
    throw SingularityError("bread matrix is numerically singular");
  }
  return es.eigenvectors() * evals.cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

SandwichResult assemble(const FitResult& fit,
                        const std::vector<Eigen::VectorXd>& scores,
                        bool subtract_weight_correction) {
  const int n = fit.data.n();
  const int dim = fit.model.dim();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& u : scores) meat.noalias() += u * u.transpose();
  meat /= n;
  if (subtract_weight_correction) {
    const auto [c, f] = weight_correction_terms(fit);
    meat -= c * f.inverse() * c.transpose();
    meat = 0.5 * (meat + meat.transpose().eval());
  }
  SandwichResult result;
  result.weight_mode = fit.weight_engine.mode;
  result.meat = meat;
  result.bread_inverse = invert_bread(fit);
  result.sigma =
      (result.bread_inverse * meat * result.bread_inverse) / n;
  result.sigma = 0.5 * (result.sigma + result.sigma.transpose().eval());
  for (int k = 0; k < dim; ++k) {
    if (result.sigma(k, k) < 0.0) {
      result.sigma(k, k) = 0.0;
      result.diag_clamped = true;
    }
  }
  return result;
}

std::vector<Eigen::VectorXd> raw_scores(const FitResult& fit) {
  std::vector<Eigen::VectorXd> scores;
  scores.reserve(fit.data.n());
  for (int i = 0; i < fit.data.n(); ++i) scores.push_back(cluster_score(fit, i));
  return scores;
}

std::vector<Eigen::VectorXd> corrected_scores(const FitResult& fit) {
  const int n = fit.data.n();
  const int dim = fit.model.dim();
  const Eigen::MatrixXd nb = double(n) * fit.bread;
  Eigen::PartialPivLU<Eigen::MatrixXd> nb_lu(nb);
  std::vector<Eigen::VectorXd> scores;
  scores.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto& c = fit.data.clusters[i];
    const int m = static_cast<int>(c.size());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k < 4; ++k) {
      if (!fit.residuals[i][k]) continue;
      const EmbeddedAI ai = kRegimens[k];
      const double w = weight(fit.weight_engine, c, ai);
      const double quad = cs_ones_quad(m, fit.covariance.sigma2_of(ai),
                                       fit.covariance.rho_of(ai));
      const Eigen::VectorXd d = fit.design_row(i, ai);
      g.noalias() += (w * quad) * d * d.transpose();
    }
    // L_i = G_i (nB)^{-1}; solve (I - L_i) u~ = u.
    const Eigen::MatrixXd amat =
        Eigen::MatrixXd::Identity(dim, dim) -
        g * nb_lu.inverse();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(amat, Eigen::ComputeThinU |
                                                    Eigen::ComputeThinV);
    const double smin = svd.singularValues()(dim - 1);
    const double smax = svd.singularValues()(0);
    if (smin <= 0.0 || smax / smin > 1e12) {
      throw SingularityError("leverage correction is ill-conditioned for cluster '" +
                             c.cluster_id + "'");
    }
    scores.push_back(svd.solve(cluster_score(fit, i)));
  }
  return scores;
}

}  // namespace

Eigen::VectorXd cluster_score(const FitResult& fit, int i) {
  const auto& c = fit.data.clusters[i];
  Eigen::VectorXd u = Eigen::VectorXd::Zero(fit.model.dim());
  for (int k = 0; k < 4; ++k) {
    if (!fit.residuals[i][k]) continue;
    const EmbeddedAI ai = kRegimens[k];
    const double w = weight(fit.weight_engine, c, ai);
    const double dot = cs_ones_dot(fit.covariance.sigma2_of(ai),
                                   fit.covariance.rho_of(ai),
                                   *fit.residuals[i][k]);
    u.noalias() += (w * dot) * fit.design_row(i, ai);
  }
  return u;
}

std::pair<Eigen::MatrixXd, Eigen::Matrix2d> weight_correction_terms(
    const FitResult& fit) {
  if (fit.weight_engine.mode != WeightMode::estimated) {
    throw DegenerateWeightsError(
        "weight correction requires estimated weights");
  }
  const int n = fit.data.n();
  const int dim = fit.model.dim();
  Eigen::MatrixXd c_hat = Eigen::MatrixXd::Zero(dim, 2);
  Eigen::Matrix2d f_hat = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    const auto& c = fit.data.clusters[i];
    for (int k = 0; k < 4; ++k) {
      if (!fit.residuals[i][k]) continue;
      const EmbeddedAI ai = kRegimens[k];
      const double dot = cs_ones_dot(fit.covariance.sigma2_of(ai),
                                     fit.covariance.rho_of(ai),
                                     *fit.residuals[i][k]);
      const Eigen::Vector2d dw =
          weight_gamma_derivative(fit.weight_engine, c, ai);
      c_hat.noalias() += (fit.design_row(i, ai) * dot) * dw.transpose();
    }
    const Eigen::Vector2d s = score_vector(fit.weight_engine, c);
    f_hat.noalias() += s * s.transpose();
  }
  c_hat /= n;
  f_hat /= n;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(f_hat);
  if (es.eigenvalues()(0) <= 1e-12 * std::max(es.eigenvalues()(1), 1.0)) {
    throw SingularityError("weight-score information matrix is singular");
  }
  return {c_hat, f_hat};
}

SandwichResult sandwich_plain(const FitResult& fit) {
  return assemble(fit, raw_scores(fit), false);
}

SandwichResult sandwich_estimated_weights(const FitResult& fit) {
  return assemble(fit, raw_scores(fit), true);
}

SandwichResult fsa4_bias_corrected(const FitResult& fit) {
  return assemble(fit, corrected_scores(fit),
                  fit.weight_engine.mode == WeightMode::estimated);
}

SandwichResult fsa3_scale(SandwichResult result, int n, int p, int q) {
  if (n <= p + q) {
    throw SingularityError("dof scaling needs n > p + q (n=" +
                           std::to_string(n) + ", p+q=" +
                           std::to_string(p + q) + ")");
  }
  result.sigma *= static_cast<double>(n) / (n - p - q);
  result.fsa.dof_scale = true;
  return result;
}

SandwichResult compute_sandwich(const FitResult& fit, const FsaConfig& fsa) {
  SandwichResult result;
  if (fsa.bias_correct) {
    result = fsa4_bias_corrected(fit);
  } else if (fit.weight_engine.mode == WeightMode::estimated) {
    result = sandwich_estimated_weights(fit);
  } else {
    result = sandwich_plain(fit);
  }
  result.fsa = fsa;
  if (fsa.dof_scale) {
    result = fsa3_scale(std::move(result), fit.data.n(), fit.model.p,
                        MeanModel::q);
    result.fsa = fsa;
  }
  return result;
}

}  // namespace csmart
