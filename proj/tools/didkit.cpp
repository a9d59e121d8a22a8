// didkit: heterogeneity-robust event-study estimation for group x period
// panels, with placebo tests, TWFE weight diagnostics, and a Monte Carlo
// harness. Subcommands: estimate | placebo | diagnose | simulate.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "didkit/errors.hpp"
#include "didkit/plot.hpp"
#include "didkit/report.hpp"

namespace fs = std::filesystem;
using namespace didkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertionFailed = 1;
constexpr int kExitValidation = 2;
constexpr int kExitComputation = 3;

struct CommonOptions {
  std::string input;
  std::string out_dir = ".";
  ColumnMap columns;
  double beta = 1.0;
  double treatment_tol = 0.0;
  std::uint64_t seed = 0;
  double alpha = 0.05;
};

void add_common(CLI::App* cmd, CommonOptions& opt, bool needs_input) {
  auto* in = cmd->add_option("--input", opt.input, "input panel CSV");
  if (needs_input) in->required();
  cmd->add_option("--out-dir", opt.out_dir, "output directory (created if missing)");
  cmd->add_option("--group", opt.columns.group, "group column name");
  cmd->add_option("--time", opt.columns.time, "time column name");
  cmd->add_option("--outcome", opt.columns.outcome, "outcome column name");
  cmd->add_option("--treatment", opt.columns.treatment, "treatment column name");
  cmd->add_option("--weight", opt.columns.weight,
                  "cell-size column name (defaults to row counts)");
  cmd->add_option("--beta", opt.beta, "discount factor in (0,1]");
  cmd->add_option("--treatment-tol", opt.treatment_tol,
                  "tolerance for dose-equality comparisons");
  cmd->add_option("--seed", opt.seed, "bootstrap seed");
  cmd->add_option("--alpha", opt.alpha, "nominal level for intervals");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("cannot write output file: " + path.string());
  out << text;
}

RunManifest make_manifest(const std::string& subcommand, const CommonOptions& opt) {
  RunManifest m;
  m.subcommand = subcommand;
  m.input_path = opt.input;
  m.output_dir = opt.out_dir;
  m.tool_version = kVersion;
  m.columns = opt.columns;
  m.discount = opt.beta;
  m.treatment_tolerance = opt.treatment_tol;
  m.seed = opt.seed;
  m.alpha = opt.alpha;
  if (!opt.input.empty()) m.input_hash = hash_file(opt.input);
  return m;
}

int run_estimate(const CommonOptions& opt, const std::string& arm, int trim_k,
                 int bootstrap, bool plot, bool placebo_only) {
  RunManifest manifest = make_manifest(placebo_only ? "placebo" : "estimate", opt);
  manifest.arm = arm;
  manifest.trim_k = trim_k;
  manifest.bootstrap_replications = bootstrap;

  Panel panel = ingest_csv(opt.input, opt.columns, opt.beta, opt.treatment_tol);
  EventStudyReport report = build_estimate_report(panel, manifest);

  // All computation is done; only now touch the filesystem.
  fs::create_directories(opt.out_dir);
  fs::path dir(opt.out_dir);
  write_text(dir / "manifest.json", manifest_json(manifest).dump(2) + "\n");
  if (placebo_only) {
    write_text(dir / "placebos.json", placebo_report_json(report).dump(2) + "\n");
    write_text(dir / "placebos.csv", rows_to_csv(placebo_rows(report)));
  } else {
    write_text(dir / "event_study.json", report_json(report).dump(2) + "\n");
    write_text(dir / "event_study.csv", rows_to_csv(report_rows(report)));
    if (plot) {
      std::ofstream svg(dir / "event_study.svg", std::ios::binary);
      write_event_study_svg(svg, report);
    }
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  return kExitOk;
}

int run_diagnose(const CommonOptions& opt, const std::string& spec, int lags,
                 int horizon) {
  RunManifest manifest = make_manifest("diagnose", opt);
  Panel panel = ingest_csv(opt.input, opt.columns, opt.beta, opt.treatment_tol);

  WeightReport report;
  if (spec == "prop1") {
    report = horizon >= 0 ? intensity_weights(panel, horizon) : intensity_weights(panel);
  } else if (spec == "prop3") {
    report = distributed_lag_weights(panel, lags);
  } else if (spec == "prop4") {
    if (horizon < 0) throw validation_error("prop4 requires --horizon");
    report = local_projection_weights(panel, horizon);
  } else {
    throw validation_error("unknown --spec '" + spec + "' (expected prop1|prop3|prop4)");
  }

  fs::create_directories(opt.out_dir);
  fs::path dir(opt.out_dir);
  write_text(dir / "manifest.json", manifest_json(manifest).dump(2) + "\n");
  write_text(dir / "weights.csv", weight_report_csv(report, panel));
  write_text(dir / "summary.txt", weight_report_summary(report));
  write_text(dir / "weights.json", weight_report_json(report, manifest).dump(2) + "\n");
  std::cout << weight_report_summary(report);
  return kExitOk;
}

int run_simulate(const CommonOptions& opt, const std::string& config_path) {
  RunManifest manifest = make_manifest("simulate", opt);
  manifest.input_path = config_path;
  manifest.input_hash = hash_file(config_path);

  SimConfig config = SimConfig::from_json_file(config_path);
  SimReport report = run_monte_carlo(config);

  fs::create_directories(opt.out_dir);
  fs::path dir(opt.out_dir);
  write_text(dir / "manifest.json", manifest_json(manifest).dump(2) + "\n");
  write_text(dir / "sim_report.json", sim_report_json(report, manifest).dump(2) + "\n");
  write_text(dir / "sim_report.csv", sim_report_csv(report));

  if (!report.assertion_failures.empty()) {
    for (const auto& f : report.assertion_failures) {
      std::cerr << "assertion failed: " << f << "\n";
    }
    return kExitAssertionFailed;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"didkit: event-study treatment-effect estimation for panels where "
               "treatment may switch on, off, or vary in intensity"};
  app.require_subcommand(1);

  CommonOptions est_opt;
  std::string arm = "plus";
  int trim_k = -1;
  int bootstrap = 100;
  bool plot = false;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "event-study effects, aggregates, placebos, and intervals");
  add_common(estimate, est_opt, true);
  estimate->add_option("--arm", arm, "plus | minus | combined");
  estimate->add_option("--trim-k", trim_k, "also report the aggregate trimmed at k");
  estimate->add_option("--bootstrap", bootstrap, "bootstrap replications");
  estimate->add_flag("--plot", plot, "write event_study.svg");

  CommonOptions pl_opt;
  std::string pl_arm = "plus";
  int pl_bootstrap = 100;
  CLI::App* placebo = app.add_subcommand(
      "placebo", "long-difference placebo estimates and the joint test");
  add_common(placebo, pl_opt, true);
  placebo->add_option("--arm", pl_arm, "plus | minus | combined");
  placebo->add_option("--bootstrap", pl_bootstrap, "bootstrap replications");

  CommonOptions diag_opt;
  std::string spec;
  int lags = 0;
  int horizon = -1;
  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "decomposition weights of TWFE regression coefficients");
  add_common(diagnose, diag_opt, true);
  diagnose->add_option("--spec", spec, "prop1 | prop3 | prop4")->required();
  diagnose->add_option("--lags", lags, "lag count for prop3");
  diagnose->add_option("--horizon", horizon, "horizon for prop4 / coefficient period for prop1");

  CommonOptions sim_opt;
  std::string config_path;
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo verification runs");
  add_common(simulate, sim_opt, false);
  simulate->add_option("--config", config_path, "simulation config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (estimate->parsed()) {
      return run_estimate(est_opt, arm, trim_k, bootstrap, plot, false);
    }
    if (placebo->parsed()) {
      return run_estimate(pl_opt, pl_arm, -1, pl_bootstrap, false, true);
    }
    if (diagnose->parsed()) {
      return run_diagnose(diag_opt, spec, lags, horizon);
    }
    if (simulate->parsed()) {
      return run_simulate(sim_opt, config_path);
    }
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const estimation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitComputation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitComputation;
  }
  return kExitOk;
}
