#include "csmart/mc.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <thread>

namespace csmart {

std::vector<Variant> default_variants(WeightMode mode) {
  std::vector<Variant> out(4);
  out[0].name = "minimal";
  out[0].fsa = preset_minimal();
  out[1].name = "on-the-shelf";
  out[1].fsa = preset_on_the_shelf();
  out[2].name = "proposed";
  out[2].fsa = preset_proposed();
  out[3].name = "full";
  out[3].fsa = preset_full();
  for (auto& v : out) v.weight_mode = mode;
  return out;
}

namespace {

using ConfigKey = std::tuple<WeightMode, CovStructure, VarianceMode, IccMode>;

ConfigKey key_of(const Variant& v) {
  return {v.weight_mode, v.structure, v.variance_mode, v.icc_mode};
}

FitConfig config_of(const Variant& v) {
  FitConfig cfg;
  cfg.structure = v.structure;
  cfg.variance_mode = v.variance_mode;
  cfg.icc_mode = v.icc_mode;
  cfg.weight_mode = v.weight_mode;
  return cfg;
}

}  // namespace

std::vector<Replication> run_point(const DesignPoint& point, int replications,
                                   std::uint64_t base_seed,
                                   std::uint64_t point_index,
                                   const std::vector<Variant>& variants,
                                   EmbeddedAI lhs, EmbeddedAI rhs,
                                   double true_value, int workers,
                                   double level, bool adjust_covariates) {
  GenerativeSpec spec =
      spec_from_design(point, splitmix64(base_seed ^ splitmix64(point_index)));
  validate_spec(spec);
  const int nvar = static_cast<int>(variants.size());
  const int dim = 4 + (adjust_covariates ? spec.p() : 0);
  const Eigen::VectorXd c = pairwise_contrast(lhs, rhs, dim).coefficients;

  std::vector<Replication> results(replications);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int j = next.fetch_add(1);
      if (j >= replications) return;
      Replication rep;
      rep.se.assign(nvar, 0.0);
      rep.covered.assign(nvar, false);
      rep.variant_ok.assign(nvar, false);
      TrialDataset ds;
      try {
        ds = generate_trial(spec, static_cast<std::uint64_t>(j));
      } catch (const Error&) {
        results[j] = std::move(rep);
        continue;
      }
      if (!adjust_covariates) {
        ds.p = 0;
        ds.covariate_names.clear();
        for (auto& cl : ds.clusters) cl.x.resize(0);
      }
      std::map<ConfigKey, std::optional<FitResult>> fits;
      auto fit_for = [&](const Variant& v) -> const FitResult* {
        auto [it, fresh] = fits.try_emplace(key_of(v));
        if (fresh) {
          try {
            it->second = fit(ds, config_of(v));
          } catch (const Error&) {
            it->second.reset();
          }
        }
        return it->second ? &*it->second : nullptr;
      };
      const FitResult* first = fit_for(variants[0]);
      if (first) {
        rep.ok = true;
        rep.estimate = c.dot(first->theta());
      }
      for (int v = 0; v < nvar; ++v) {
        const FitResult* f = fit_for(variants[v]);
        if (!f) continue;
        try {
          const SandwichResult sw = compute_sandwich(*f, variants[v].fsa);
          const double var = c.dot(sw.sigma * c);
          const double est = c.dot(f->theta());
          const Interval ci =
              interval(est, var, ds.n(), f->model.p, MeanModel::q,
                       variants[v].fsa.reference, level);
          rep.se[v] = var > 0.0 ? std::sqrt(var) : 0.0;
          rep.covered[v] = ci.low <= true_value && true_value <= ci.high;
          rep.variant_ok[v] = true;
        } catch (const Error&) {
          // variant_ok stays false
        }
      }
      results[j] = std::move(rep);
    }
  };

  const int nthreads = std::max(1, workers);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

std::vector<ExperimentRow> run_experiment(const SimulationDesign& design,
                                          const std::vector<Variant>& variants,
                                          EmbeddedAI lhs, EmbeddedAI rhs,
                                          double true_value, int workers,
                                          double level) {
  std::vector<ExperimentRow> rows;
  const auto points = design.points();
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const auto reps =
        run_point(points[pi], design.replications, design.base_seed,
                  static_cast<std::uint64_t>(pi), variants, lhs, rhs,
                  true_value, workers, level, design.adjust_covariates);
    const int total = static_cast<int>(reps.size());
    int fit_failures = 0;
    double sum_est = 0.0, sum_sq = 0.0, sum_err2 = 0.0;
    int n_est = 0;
    for (const auto& rep : reps) {
      if (!rep.ok) {
        ++fit_failures;
        continue;
      }
      ++n_est;
      sum_est += rep.estimate;
      sum_sq += rep.estimate * rep.estimate;
      sum_err2 += (rep.estimate - true_value) * (rep.estimate - true_value);
    }
    for (std::size_t v = 0; v < variants.size(); ++v) {
      ExperimentRow row;
      row.point = points[pi];
      row.variant = variants[v].name;
      row.replications = total;
      row.failures = fit_failures;
      if (n_est > 0) {
        row.avg_estimate = sum_est / n_est;
        row.bias = row.avg_estimate - true_value;
        row.rmse = std::sqrt(sum_err2 / n_est);
        // Population convention so rmse^2 = bias^2 + sd^2 holds exactly.
        const double ss =
            sum_sq / n_est - row.avg_estimate * row.avg_estimate;
        row.sd_estimate = ss > 0.0 ? std::sqrt(ss) : 0.0;
      }
      int n_ok = 0, n_cov = 0, n_cov_all = 0;
      double sum_var = 0.0;
      for (const auto& rep : reps) {
        if (rep.ok && !rep.variant_ok[v]) ++row.variant_failures;
        if (!rep.ok || !rep.variant_ok[v]) continue;
        ++n_ok;
        sum_var += rep.se[v] * rep.se[v];
        if (rep.covered[v]) {
          ++n_cov;
          ++n_cov_all;
        }
      }
      if (n_ok > 0) {
        row.avg_se = std::sqrt(sum_var / n_ok);
        row.coverage = static_cast<double>(n_cov) / n_ok;
        row.mc_se_of_coverage =
            std::sqrt(row.coverage * (1.0 - row.coverage) / n_ok);
      }
      row.coverage_all = static_cast<double>(n_cov_all) / total;
      row.flagged =
          (fit_failures + row.variant_failures) > 0.05 * total;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::pair<double, double> nozero_and_bootse(
    const std::vector<Replication>& reps, int variant, int n, int p, int q,
    Reference reference, double level) {
  int count = 0, excl = 0;
  double sum_var = 0.0;
  for (const auto& rep : reps) {
    if (!rep.ok || !rep.variant_ok[variant]) continue;
    ++count;
    const double se = rep.se[variant];
    sum_var += se * se;
    const Interval ci = interval(rep.estimate, se * se, n, p, q, reference,
                                 level);
    if (ci.low > 0.0 || ci.high < 0.0) ++excl;
  }
  if (count == 0) return {0.0, 0.0};
  return {static_cast<double>(excl) / count, std::sqrt(sum_var / count)};
}

namespace {

void emit_row_fields(const ExperimentRow& r, std::ostream& out,
                     const char* sep) {
  out << r.point.n << sep << r.point.m << sep << r.point.delta << sep
      << r.point.icc << sep << r.point.kappa << sep << r.point.cor_xy << sep
      << r.variant << sep << r.replications << sep << r.failures << sep
      << r.variant_failures << sep << r.avg_estimate << sep << r.bias << sep
      << r.sd_estimate << sep << r.rmse << sep << r.avg_se << sep
      << r.coverage << sep << r.coverage_all << sep << r.mc_se_of_coverage
      << sep << (r.flagged ? 1 : 0) << "\n";
}

}  // namespace

void emit_table(const std::vector<ExperimentRow>& rows, std::ostream& out) {
  out << "n,m,delta,icc,kappa,cor_xy,variant,replications,failures,"
         "variant_failures,avg_estimate,bias,sd_estimate,rmse,avg_se,"
         "coverage,coverage_all,mc_se_coverage,flagged\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& r : rows) emit_row_fields(r, out, ",");
}

void emit_table_text(const std::vector<ExperimentRow>& rows,
                     std::ostream& out) {
  out << std::fixed << std::setprecision(4);
  out << std::setw(5) << "n" << std::setw(5) << "m" << std::setw(7) << "delta"
      << std::setw(7) << "icc" << std::setw(14) << "variant" << std::setw(10)
      << "bias" << std::setw(10) << "sd" << std::setw(10) << "avg_se"
      << std::setw(10) << "coverage" << std::setw(6) << "flag"
      << "\n";
  for (const auto& r : rows) {
    out << std::setw(5) << r.point.n << std::setw(5) << r.point.m
        << std::setw(7) << r.point.delta << std::setw(7) << r.point.icc
        << std::setw(14) << r.variant << std::setw(10) << r.bias
        << std::setw(10) << r.sd_estimate << std::setw(10) << r.avg_se
        << std::setw(10) << r.coverage << std::setw(6)
        << (r.flagged ? "*" : "") << "\n";
  }
}

}  // namespace csmart
