#include "csmart/simgen.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "csmart/covariance.hpp"

namespace csmart {

using nlohmann::json;

double GenerativeSpec::sigma2_marginal() const {
  return sd_y * sd_y - eta_true.squaredNorm();
}

namespace {

double causal_mean(const Eigen::Vector4d& beta, EmbeddedAI ai) {
  return beta[0] + beta[1] * ai.a1 + beta[2] * ai.a2 + beta[3] * ai.a1 * ai.a2;
}

struct Branch {
  double shift = 0.0;  // mean offset relative to mu(ai, x)
  double tau2 = 0.0;
  double rho = 0.0;
};

// Conditional moments of each response branch. A responder cluster belongs
// to both regimens of its first-stage arm, so its branch is shared: its mean
// offset and the non-responder offsets are the unique completion of
//   kappa * xi_R + (1 - kappa) * xi_NR(ai) = mu(ai)   for both a2,
// anchored at xi_R = mean_a2 mu(a1, a2) + (1 - kappa) * omega-bar. The
// branch ICCs keep the member-level noise (1 - rho) sigma2 fixed, which
// reproduces both the marginal variance and the marginal ICC per regimen.
class BranchTable {
 public:
  explicit BranchTable(const GenerativeSpec& spec) {
    const double s2 = spec.sigma2_marginal();
    const double noise = (1.0 - spec.icc) * s2;
    for (int arm = 0; arm < 2; ++arm) {
      const int a1 = arm == 0 ? 1 : -1;
      const double kappa = spec.kappa(a1);
      const EmbeddedAI hi{a1, 1}, lo{a1, -1};
      const double omega_bar = 0.5 * (spec.response_effect[regimen_index(hi)] +
                                      spec.response_effect[regimen_index(lo)]);
      const double mu_gap = 0.5 * (causal_mean(spec.beta_true, hi) -
                                   causal_mean(spec.beta_true, lo));
      responder_[arm].shift = (1.0 - kappa) * omega_bar;
      responder_[arm].tau2 = s2 - kappa * (1.0 - kappa) * omega_bar * omega_bar;
      responder_[arm].rho = 1.0 - noise / responder_[arm].tau2;
      for (const EmbeddedAI ai : {hi, lo}) {
        // Effective response split for this regimen; equals the configured
        // omega when the four omegas are mutually consistent.
        const double omega_eff =
            omega_bar - ai.a2 * mu_gap / (1.0 - kappa);
        Branch& b = nonresponder_[regimen_index(ai)];
        b.shift = -kappa * omega_eff;
        b.tau2 = s2 - kappa * omega_eff * omega_eff +
                 kappa * kappa * omega_bar * omega_bar;
        b.rho = 1.0 - noise / b.tau2;
      }
    }
  }

  const Branch& responder(int a1) const { return responder_[a1 == 1 ? 0 : 1]; }
  const Branch& nonresponder(EmbeddedAI ai) const {
    return nonresponder_[regimen_index(ai)];
  }

 private:
  std::array<Branch, 2> responder_;
  std::array<Branch, 4> nonresponder_;
};

}  // namespace

void validate_spec(const GenerativeSpec& spec) {
  if (spec.n < 1) throw FeasibilityError("n must be >= 1");
  if (spec.m_lo < 1 || spec.m_hi < spec.m_lo) {
    throw FeasibilityError("cluster-size range needs 1 <= m_lo <= m_hi");
  }
  if (!(spec.sd_y > 0.0)) throw FeasibilityError("sd_y must be positive");
  if (!(spec.icc >= 0.0 && spec.icc < 1.0)) {
    throw FeasibilityError("icc must lie in [0, 1)");
  }
  for (const double kappa : spec.response_rate) {
    if (!(kappa > 0.0 && kappa < 1.0)) {
      throw FeasibilityError("response rates must lie in (0, 1)");
    }
  }
  if (!(spec.sigma2_marginal() > 0.0)) {
    throw FeasibilityError(
        "covariate contribution eta'eta reaches sd_y^2; residual variance "
        "would be nonpositive");
  }
  const BranchTable table(spec);
  auto check = [](const Branch& b, const std::string& what) {
    if (!(b.tau2 > 0.0)) {
      throw FeasibilityError("response effect and regimen mean spread "
                             "exceed the marginal variance for " + what);
    }
    if (b.rho >= 1.0) {
      throw FeasibilityError("conditional ICC reaches 1 for " + what);
    }
  };
  for (const int a1 : {1, -1}) {
    check(table.responder(a1),
          "responders of arm a1=" + std::to_string(a1));
  }
  for (const EmbeddedAI ai : kRegimens) {
    check(table.nonresponder(ai),
          "non-responders of regimen (" + std::to_string(ai.a1) + "," +
              std::to_string(ai.a2) + ")");
  }
}

RegimenMoments regimen_moments_from_pathways(double p, double mu1, double mu2,
                                             double s1, double s2, double rho1,
                                             double rho2) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw FeasibilityError("mixture probability must lie in [0, 1]");
  }
  RegimenMoments out;
  out.mu = p * mu1 + (1.0 - p) * mu2;
  out.sigma2 = p * s1 + (1.0 - p) * s2 + p * (1.0 - p) * (mu1 - mu2) * (mu1 - mu2);
  out.rho = (p * s1 * rho1 + (1.0 - p) * s2 * rho2) / out.sigma2;
  return out;
}

ConditionalMoments conditional_moments(const GenerativeSpec& spec,
                                       EmbeddedAI ai, const Eigen::VectorXd& x,
                                       int r) {
  const double kappa = spec.kappa(ai.a1);
  const double omega = spec.response_effect[regimen_index(ai)];
  const double s2 = spec.sigma2_marginal();
  double mu = causal_mean(spec.beta_true, ai);
  if (spec.p() > 0) mu += spec.eta_true.dot(x);
  ConditionalMoments out;
  out.xi = mu + (r == 1 ? (1.0 - kappa) * omega : -kappa * omega);
  out.tau2 = s2 - kappa * (1.0 - kappa) * omega * omega;
  out.rho_c = (spec.icc * s2 - kappa * (1.0 - kappa) * omega * omega) / out.tau2;
  return out;
}

TrialDataset generate_trial(const GenerativeSpec& spec,
                            std::uint64_t replication) {
  validate_spec(spec);
  const BranchTable table(spec);

  TrialDataset ds;
  ds.p = spec.p();
  for (int k = 0; k < ds.p; ++k) {
    ds.covariate_names.push_back("x" + std::to_string(k + 1));
  }
  ds.clusters.reserve(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    Rng rng = Rng::substream(spec.seed, replication, static_cast<std::uint64_t>(i));
    ClusterRecord c;
    c.cluster_id = "c" + std::to_string(i + 1);
    const int m = rng.uniform_int(spec.m_lo, spec.m_hi);
    c.x = Eigen::VectorXd(ds.p);
    for (int k = 0; k < ds.p; ++k) c.x[k] = rng.gaussian();
    c.a1 = rng.coin_sign();
    c.r = rng.bernoulli(spec.kappa(c.a1)) ? 1 : 0;
    if (c.r == 0) c.a2 = rng.coin_sign();

    double base = spec.beta_true[0] + spec.beta_true[1] * c.a1;
    if (ds.p > 0) base += spec.eta_true.dot(c.x);
    const Branch* branch;
    if (c.r == 1) {
      branch = &table.responder(c.a1);
      // a2 terms average out of the responder mean.
    } else {
      const EmbeddedAI ai{c.a1, *c.a2};
      base += spec.beta_true[2] * ai.a2 + spec.beta_true[3] * ai.a1 * ai.a2;
      branch = &table.nonresponder(ai);
    }
    // A branch ICC may come out negative when the response split outweighs
    // the between-cluster variance budget; clamp to the CS validity range
    // for this cluster's size.
    const double rho_lo = m > 1 ? -(1.0 - 1e-9) / (m - 1) : 0.0;
    const double rho = std::clamp(branch->rho, rho_lo, kRhoMax);
    const double mean = base + branch->shift;
    if (rho >= 0.0) {
      c.y = cs_cholesky_sample(m, branch->tau2, rho, mean, rng);
    } else {
      const Eigen::MatrixXd chol =
          Eigen::LLT<Eigen::MatrixXd>(cs_dense(m, branch->tau2, rho))
              .matrixL();
      Eigen::VectorXd z(m);
      for (int j = 0; j < m; ++j) z[j] = rng.gaussian();
      c.y = (chol * z).array() + mean;
    }
    ds.clusters.push_back(std::move(c));
  }
  return ds;
}

GenerativeSpec spec_from_design(const DesignPoint& pt, std::uint64_t seed) {
  if (!(pt.delta > 0.0)) throw FeasibilityError("delta must be positive");
  if (pt.cor_xy * pt.cor_xy >= 1.0) {
    throw FeasibilityError("cor_xy must lie in (-1, 1)");
  }
  GenerativeSpec spec;
  spec.n = pt.n;
  spec.m_lo = spec.m_hi = pt.m;
  spec.sd_y = 3.5 / pt.delta;
  spec.icc = pt.icc;
  spec.response_rate = {pt.kappa, pt.kappa};
  spec.eta_true = Eigen::VectorXd::Constant(1, pt.cor_xy * spec.sd_y);
  spec.response_effect = {0.25 * spec.sd_y, 0.25 * spec.sd_y,
                          0.25 * spec.sd_y, 0.25 * spec.sd_y};
  spec.seed = seed;
  return spec;
}

std::vector<DesignPoint> SimulationDesign::points() const {
  std::vector<DesignPoint> out;
  for (int ni : n)
    for (int mi : m)
      for (double di : delta)
        for (double ii : icc)
          for (double ki : kappa)
            for (double ci : cor_xy) {
              out.push_back(DesignPoint{ni, mi, di, ii, ki, ci});
            }
  return out;
}

std::string to_json(const GenerativeSpec& spec) {
  json j;
  j["n"] = spec.n;
  j["m_lo"] = spec.m_lo;
  j["m_hi"] = spec.m_hi;
  j["beta_true"] = {spec.beta_true[0], spec.beta_true[1], spec.beta_true[2],
                    spec.beta_true[3]};
  j["eta_true"] = std::vector<double>(spec.eta_true.data(),
                                      spec.eta_true.data() + spec.eta_true.size());
  j["sd_y"] = spec.sd_y;
  j["icc"] = spec.icc;
  j["response_rate"] = spec.response_rate;
  j["response_effect"] = spec.response_effect;
  j["seed"] = spec.seed;
  return j.dump(2);
}

GenerativeSpec spec_from_json(const std::string& text) {
  GenerativeSpec spec;
  try {
    const json j = json::parse(text);
    spec.n = j.value("n", spec.n);
    spec.m_lo = j.value("m_lo", spec.m_lo);
    spec.m_hi = j.value("m_hi", spec.m_hi);
    if (j.contains("beta_true")) {
      const auto v = j.at("beta_true").get<std::vector<double>>();
      if (v.size() != 4) throw ParseError("beta_true must have length 4");
      for (int k = 0; k < 4; ++k) spec.beta_true[k] = v[k];
    }
    if (j.contains("eta_true")) {
      const auto v = j.at("eta_true").get<std::vector<double>>();
      spec.eta_true = Eigen::Map<const Eigen::VectorXd>(v.data(),
                                                        static_cast<long>(v.size()));
    }
    spec.sd_y = j.value("sd_y", spec.sd_y);
    spec.icc = j.value("icc", spec.icc);
    if (j.contains("response_rate")) {
      spec.response_rate = j.at("response_rate").get<std::array<double, 2>>();
    }
    if (j.contains("response_effect")) {
      spec.response_effect =
          j.at("response_effect").get<std::array<double, 4>>();
    }
    spec.seed = j.value("seed", spec.seed);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad generator spec JSON: ") + e.what());
  }
  return spec;
}

std::string to_json(const SimulationDesign& design) {
  json j;
  j["n"] = design.n;
  j["m"] = design.m;
  j["delta"] = design.delta;
  j["icc"] = design.icc;
  j["kappa"] = design.kappa;
  j["cor_xy"] = design.cor_xy;
  j["replications"] = design.replications;
  j["base_seed"] = design.base_seed;
  j["adjust_covariates"] = design.adjust_covariates;
  return j.dump(2);
}

SimulationDesign design_from_json(const std::string& text) {
  SimulationDesign d;
  try {
    const json j = json::parse(text);
    if (j.contains("n")) d.n = j.at("n").get<std::vector<int>>();
    if (j.contains("m")) d.m = j.at("m").get<std::vector<int>>();
    if (j.contains("delta")) d.delta = j.at("delta").get<std::vector<double>>();
    if (j.contains("icc")) d.icc = j.at("icc").get<std::vector<double>>();
    if (j.contains("kappa")) d.kappa = j.at("kappa").get<std::vector<double>>();
    if (j.contains("cor_xy"))
      d.cor_xy = j.at("cor_xy").get<std::vector<double>>();
    d.replications = j.value("replications", d.replications);
    d.base_seed = j.value("base_seed", d.base_seed);
    d.adjust_covariates = j.value("adjust_covariates", d.adjust_covariates);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad design JSON: ") + e.what());
  }
  if (d.replications < 1) throw FeasibilityError("replications must be >= 1");
  return d;
}

SimulationDesign load_design(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return design_from_json(buf.str());
}

}  // namespace csmart
