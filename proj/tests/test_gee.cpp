#include <doctest.h>

#include <cmath>

#include "csmart/gee.hpp"
#include "csmart/sandwich.hpp"
#include "csmart/simgen.hpp"
#include "helpers.hpp"

using namespace csmart;
using testutil::cluster;

namespace {

// Responder-free dataset: every cluster lands in exactly one regimen, with
// regimen means mu[] and CS(sigma2, rho) noise.
TrialDataset nonresponder_grid(int per_regimen, int m, double sigma2,
                               double rho, const std::array<double, 4>& mu,
                               std::uint64_t seed) {
  TrialDataset ds;
  ds.p = 0;
  Rng rng(seed);
  int id = 0;
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < per_regimen; ++i) {
      ClusterRecord rec;
      rec.cluster_id = "c" + std::to_string(id++);
      rec.a1 = kRegimens[k].a1;
      rec.r = 0;
      rec.a2 = kRegimens[k].a2;
      rec.x.resize(0);
      rec.y = cs_cholesky_sample(m, sigma2, rho, mu[k], rng);
      ds.clusters.push_back(std::move(rec));
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("weighted per-regimen means, hand-worked example") {
  TrialDataset ds;
  ds.p = 0;
  ds.clusters.push_back(cluster("c1", 1, 1, {10.0}));       // W = 2, both (1, .)
  ds.clusters.push_back(cluster("c2", 1, 0, {20.0}, 1));    // W = 4, (1, 1)
  ds.clusters.push_back(cluster("c3", -1, 0, {5.0}, 1));
  ds.clusters.push_back(cluster("c4", -1, 0, {7.0}, -1));

  FitConfig cfg;
  cfg.causal_transform = testutil::regimen_mean_basis();
  const FitResult f = fit(ds, cfg);
  REQUIRE(f.converged);
  // mu-hat(1,1) = (2*10 + 4*20)/6; mu-hat(1,-1) = 10 (responder only).
  CHECK(f.theta()[0] == doctest::Approx(50.0 / 3.0).epsilon(1e-10));
  CHECK(f.theta()[1] == doctest::Approx(10.0).epsilon(1e-10));
  CHECK(f.theta()[2] == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(f.theta()[3] == doctest::Approx(7.0).epsilon(1e-10));
}

TEST_CASE("moment covariance update recovers the generating CS parameters") {
  const std::array<double, 4> mu = {24.0, 21.0, 19.0, 17.0};
  const auto ds = nonresponder_grid(150, 4, 9.0, 0.3, mu, 42);
  const FitResult f = fit(ds);
  REQUIRE(f.converged);
  for (int k = 0; k < 4; ++k) {
    CHECK(f.covariance.sigma2[k] == doctest::Approx(9.0).epsilon(0.15));
    CHECK(f.covariance.rho[k] == doctest::Approx(0.3).epsilon(0.35));
  }
}

TEST_CASE("variance pooling flags") {
  const std::array<double, 4> mu = {24.0, 21.0, 19.0, 17.0};
  const auto ds = nonresponder_grid(40, 3, 4.0, 0.2, mu, 9);

  FitConfig cfg;
  cfg.variance_mode = VarianceMode::homogeneous;
  cfg.icc_mode = IccMode::shared;
  const FitResult f = fit(ds, cfg);
  for (int k = 1; k < 4; ++k) {
    CHECK(f.covariance.sigma2[k] == f.covariance.sigma2[0]);
    CHECK(f.covariance.rho[k] == f.covariance.rho[0]);
  }

  FitConfig indep;
  indep.structure = CovStructure::independence;
  const FitResult g = fit(ds, indep);
  for (int k = 0; k < 4; ++k) CHECK(g.covariance.rho[k] == 0.0);
}

TEST_CASE("negative empirical within-cluster correlation floors rho at zero") {
  TrialDataset ds;
  ds.p = 0;
  Rng rng(3);
  int id = 0;
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < 10; ++i) {
      ClusterRecord rec;
      rec.cluster_id = "c" + std::to_string(id++);
      rec.a1 = kRegimens[k].a1;
      rec.r = 0;
      rec.a2 = kRegimens[k].a2;
      rec.x.resize(0);
      const double d = 2.0 + rng.uniform();
      rec.y.resize(2);
      rec.y << 10.0 + d, 10.0 - d;  // anti-correlated pair
      ds.clusters.push_back(std::move(rec));
    }
  }
  const FitResult f = fit(ds);
  for (int k = 0; k < 4; ++k) CHECK(f.covariance.rho[k] == 0.0);
}

TEST_CASE("saturated no-covariate fit is invariant to the working structure") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ds = testutil::random_trial(rng, 14, 3);
    FitConfig exch;
    FitConfig indep;
    indep.structure = CovStructure::independence;
    const Eigen::VectorXd a = fit(ds, exch).theta();
    const Eigen::VectorXd b = fit(ds, indep).theta();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("causal reparameterization maps back to the same mean surface") {
  Rng rng(23);
  const auto ds = testutil::random_trial(rng, 24, 3, 1);
  FitConfig plain;
  const FitResult f1 = fit(ds, plain);
  FitConfig repar;
  repar.causal_transform = testutil::regimen_mean_basis();
  const FitResult f2 = fit(ds, repar);
  // Row k of the transform maps (1,a1,a2,a1a2) to the regimen-k indicator,
  // so theta2' G t = theta1' t means beta1 = G' beta2.
  const Eigen::Vector4d beta1 = f1.theta().head<4>();
  const Eigen::Vector4d beta2 = f2.theta().head<4>();
  const Eigen::Vector4d mapped =
      testutil::regimen_mean_basis().transpose() * beta2;
  CHECK((beta1 - mapped).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(f1.theta()[4] == doctest::Approx(f2.theta()[4]).epsilon(1e-8));
  // Same fitted means either way.
  for (int i = 0; i < ds.n(); ++i) {
    for (const auto ai : kRegimens) {
      CHECK(f1.model.mu(ai, ds.clusters[i].x) ==
            doctest::Approx(f2.design_row(i, ai).dot(f2.theta()))
                .epsilon(1e-8));
    }
  }
}

TEST_CASE("design rows evaluate the fitted mean") {
  Rng rng(29);
  const auto ds = testutil::random_trial(rng, 20, 2, 2);
  const FitResult f = fit(ds);
  for (int i = 0; i < ds.n(); ++i) {
    for (const auto ai : kRegimens) {
      CHECK(f.design_row(i, ai).dot(f.theta()) ==
            doctest::Approx(f.model.mu(ai, ds.clusters[i].x)).epsilon(1e-10));
    }
  }
  // Centering equals the unweighted mean of cluster covariates.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
  for (const auto& rec : ds.clusters) mean += rec.x;
  mean /= ds.n();
  CHECK((f.model.centering - mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("missing regimen cell fails validation, not linear algebra") {
  Rng rng(41);
  TrialDataset ds = testutil::random_trial(rng, 16, 2);
  // Remove every cluster consistent with (-1, -1).
  std::vector<ClusterRecord> keep;
  for (auto& rec : ds.clusters) {
    if (!consistency_indicator(rec, {-1, -1})) keep.push_back(std::move(rec));
  }
  ds.clusters = std::move(keep);
  CHECK_THROWS_AS(fit(ds), ValidationError);
}

TEST_CASE("large-sample fit recovers the generating parameters") {
  DesignPoint pt;
  pt.n = 500;
  const GenerativeSpec spec = spec_from_design(pt, 4242);
  const TrialDataset ds = generate_trial(spec, 0);
  const FitResult f = fit(ds);
  REQUIRE(f.converged);
  const SandwichResult sw = sandwich_plain(f);
  Eigen::VectorXd truth(5);
  truth << spec.beta_true, spec.eta_true;
  for (int k = 0; k < 5; ++k) {
    const double se = std::sqrt(sw.sigma(k, k));
    CHECK(std::abs(f.theta()[k] - truth[k]) < 3.0 * se);
  }
}
