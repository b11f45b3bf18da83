#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "csmart/inference.hpp"
#include "csmart/mc.hpp"
#include "csmart/oracles.hpp"

namespace {

using namespace csmart;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct EstimatorFlags {
  std::string weights = "known";
  std::string cov = "exchangeable";
  std::string var = "per-regimen";
  std::string icc = "per-regimen";

  FitConfig fit_config() const {
    FitConfig cfg;
    cfg.weight_mode =
        weights == "estimated" ? WeightMode::estimated : WeightMode::known;
    cfg.structure = cov == "independence" ? CovStructure::independence
                                          : CovStructure::exchangeable;
    cfg.variance_mode = var == "homogeneous" ? VarianceMode::homogeneous
                                             : VarianceMode::per_regimen;
    cfg.icc_mode = icc == "shared" ? IccMode::shared : IccMode::per_regimen;
    return cfg;
  }
};

void print_report(const InferenceReport& rep, const std::string& preset,
                  std::ostream& out) {
  out << "== adjustment: " << preset
      << " (reference: " << (rep.fsa.reference == Reference::t ? "t" : "normal")
      << ", level " << rep.level << ")\n";
  out << std::fixed << std::setprecision(4);
  auto block = [&](const char* title, const std::vector<InferenceRow>& rows) {
    out << title << "\n";
    out << std::setw(22) << "term" << std::setw(12) << "estimate"
        << std::setw(12) << "se" << std::setw(12) << "ci_low" << std::setw(12)
        << "ci_high" << std::setw(12) << "p_value" << "\n";
    for (const auto& r : rows) {
      out << std::setw(22) << r.label << std::setw(12) << r.estimate
          << std::setw(12) << r.se << std::setw(12) << r.ci_low
          << std::setw(12) << r.ci_high << std::setw(12) << r.p_value << "\n";
    }
  };
  block("coefficients:", rep.parameters);
  block("pairwise effects:", rep.contrasts);
  out << "\n";
}

void write_report_csv(const std::vector<std::pair<std::string, InferenceReport>>&
                          reports,
                      std::ostream& out) {
  out << "adjustment,block,term,estimate,se,ci_low,ci_high,p_value\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& [preset, rep] : reports) {
    for (const auto& r : rep.parameters) {
      out << preset << ",coefficient," << r.label << "," << r.estimate << ","
          << r.se << "," << r.ci_low << "," << r.ci_high << "," << r.p_value
          << "\n";
    }
    for (const auto& r : rep.contrasts) {
      out << preset << ",effect," << r.label << "," << r.estimate << ","
          << r.se << "," << r.ci_low << "," << r.ci_high << "," << r.p_value
          << "\n";
    }
  }
}

int run_analyze(const std::string& data_path,
                const std::vector<std::string>& presets,
                const EstimatorFlags& flags, double level,
                const std::string& out_path) {
  const TrialDataset ds = load_csv(data_path);
  const auto report_check = validate_design(ds);
  if (!report_check.ok) {
    std::cerr << report_check.str();
    return kExitValidation;
  }
  const FitResult fitted = fit(ds, flags.fit_config());
  std::vector<std::pair<std::string, InferenceReport>> reports;
  for (const auto& preset : presets) {
    const SandwichResult sw = compute_sandwich(fitted, preset_by_name(preset));
    reports.emplace_back(
        preset, report(fitted, sw, all_pairwise_contrasts(fitted.model.dim()),
                       level));
  }
  for (const auto& [preset, rep] : reports) {
    print_report(rep, preset, std::cout);
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw ParseError("cannot open '" + out_path + "' for writing");
    write_report_csv(reports, out);
  }
  return kExitOk;
}

int run_simulate(const std::string& design_path, std::uint64_t seed,
                 int workers, double level, const std::string& out_path,
                 bool text, bool adjust, const EstimatorFlags& flags) {
  SimulationDesign design = load_design(design_path);
  design.base_seed = seed;
  if (adjust) design.adjust_covariates = true;
  FitConfig cfg = flags.fit_config();
  std::vector<Variant> variants = default_variants(cfg.weight_mode);
  for (auto& v : variants) {
    v.structure = cfg.structure;
    v.variance_mode = cfg.variance_mode;
    v.icc_mode = cfg.icc_mode;
  }
  // Target contrast mu(1,1) - mu(-1,-1); 2 b1 + 2 b2 = 3.5 by construction.
  const auto rows = run_experiment(design, variants, EmbeddedAI{1, 1},
                                   EmbeddedAI{-1, -1}, 3.5, workers, level);
  if (out_path.empty()) {
    text ? emit_table_text(rows, std::cout) : emit_table(rows, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw ParseError("cannot open '" + out_path + "' for writing");
    emit_table(rows, out);
    if (text) emit_table_text(rows, std::cout);
  }
  for (const auto& row : rows) {
    if (row.flagged) {
      std::cerr << "flagged: > 5% failures for variant " << row.variant
                << " at n=" << row.point.n << "\n";
      return kExitNumerical;
    }
  }
  return kExitOk;
}

int run_validate(std::uint64_t seed) {
  const auto reports = run_validation_suite(seed);
  bool all_pass = true;
  std::cout << std::scientific << std::setprecision(3);
  for (const auto& rep : reports) {
    std::cout << (rep.pass ? "PASS" : "FAIL") << "  " << std::setw(40)
              << std::left << rep.label << std::right
              << "  discrepancy " << rep.abs_discrepancy << "  tolerance "
              << rep.tolerance << "\n";
    all_pass = all_pass && rep.pass;
  }
  return all_pass ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted GEE analysis and simulation for clustered "
               "two-stage adaptive-intervention trials"};
  app.require_subcommand(1);

  EstimatorFlags flags;
  double level = 0.95;
  auto add_estimator_flags = [&](CLI::App* cmd) {
    cmd->add_option("--weights", flags.weights, "known|estimated")
        ->check(CLI::IsMember({"known", "estimated"}));
    cmd->add_option("--cov", flags.cov, "exchangeable|independence")
        ->check(CLI::IsMember({"exchangeable", "independence"}));
    cmd->add_option("--var", flags.var, "per-regimen|homogeneous")
        ->check(CLI::IsMember({"per-regimen", "homogeneous"}));
    cmd->add_option("--icc", flags.icc, "per-regimen|shared")
        ->check(CLI::IsMember({"per-regimen", "shared"}));
    cmd->add_option("--level", level, "confidence level")->default_val(0.95);
  };

  auto* analyze = app.add_subcommand("analyze", "Fit one dataset and report "
                                                "effects with CIs");
  std::string data_path, out_path;
  std::vector<std::string> presets;
  analyze->add_option("data", data_path, "input CSV")->required();
  analyze->add_option("--fsa", presets,
                      "adjustment preset(s): minimal|on-the-shelf|proposed|full")
      ->check(CLI::IsMember({"minimal", "on-the-shelf", "proposed", "full"}));
  analyze->add_option("--out", out_path, "also write a CSV report here");
  add_estimator_flags(analyze);

  auto* simulate = app.add_subcommand(
      "simulate", "Run the coverage experiment for a design grid");
  std::string design_path, sim_out;
  std::uint64_t seed = 0;
  int workers = 1;
  bool text = false;
  simulate->add_option("design", design_path, "design JSON")->required();
  simulate->add_option("--seed", seed, "base seed")->required();
  simulate->add_option("--workers", workers, "worker threads")->default_val(1);
  simulate->add_option("--out", sim_out, "output CSV path (default stdout)");
  simulate->add_flag("--text", text, "aligned text table");
  bool adjust = false;
  simulate->add_flag("--adjust", adjust,
                     "adjust the fitted mean model for generated covariates");
  add_estimator_flags(simulate);

  auto* validate = app.add_subcommand(
      "validate", "Run the built-in reference cross-checks");
  std::uint64_t validate_seed = 12345;
  validate->add_option("--seed", validate_seed, "oracle seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (presets.empty()) presets = {"full"};
    if (app.got_subcommand(analyze)) {
      return run_analyze(data_path, presets, flags, level, out_path);
    }
    if (app.got_subcommand(simulate)) {
      return run_simulate(design_path, seed, workers, level, sim_out, text,
                          adjust, flags);
    }
    return run_validate(validate_seed);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const FeasibilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
