#include "csmart/covariance.hpp"

#include <cmath>
#include <string>

namespace csmart {

namespace {

void check_params(int m, double sigma2, double rho) {
  if (sigma2 <= 0.0) {
    throw SingularityError("sigma2 must be positive, got " +
                           std::to_string(sigma2));
  }
  if (rho >= 1.0 || (m > 1 && rho <= -1.0 / (m - 1))) {
    throw SingularityError("CS(" + std::to_string(rho) + ") is singular for m=" +
                           std::to_string(m));
  }
}

}  // namespace

Eigen::VectorXd cs_inverse_apply(double sigma2, double rho,
                                 const Eigen::VectorXd& v) {
  const int m = static_cast<int>(v.size());
  check_params(m, sigma2, rho);
  const double denom = 1.0 + (m - 1) * rho;
  const double a = 1.0 / (1.0 - rho);
  const double b = rho / ((1.0 - rho) * denom);
  return (a * v.array() - b * v.sum()).matrix() / sigma2;
}

double cs_ones_quad(int m, double sigma2, double rho) {
  check_params(m, sigma2, rho);
  return m / (sigma2 * (1.0 + (m - 1) * rho));
}

double cs_ones_dot(double sigma2, double rho, const Eigen::VectorXd& v) {
  const int m = static_cast<int>(v.size());
  check_params(m, sigma2, rho);
  return v.sum() / (sigma2 * (1.0 + (m - 1) * rho));
}

double cs_log_det(int m, double sigma2, double rho) {
  check_params(m, sigma2, rho);
  return m * std::log(sigma2) + (m - 1) * std::log(1.0 - rho) +
         std::log(1.0 + (m - 1) * rho);
}

Eigen::VectorXd cs_cholesky_sample(int m, double sigma2, double rho,
                                   double mean, Rng& rng) {
  check_params(m, sigma2, rho);
  if (rho < 0.0) throw SingularityError("cs_cholesky_sample requires rho >= 0");
  const double sigma = std::sqrt(sigma2);
  const double shared = std::sqrt(rho) * rng.gaussian();
  Eigen::VectorXd out(m);
  const double own_scale = std::sqrt(1.0 - rho);
  for (int j = 0; j < m; ++j) {
    out[j] = mean + sigma * (shared + own_scale * rng.gaussian());
  }
  return out;
}

Eigen::MatrixXd cs_dense(int m, double sigma2, double rho) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Constant(m, m, sigma2 * rho);
  v.diagonal().setConstant(sigma2);
  return v;
}

}  // namespace csmart
