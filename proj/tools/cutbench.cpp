#include <CLI11.hpp>
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "cutpost/error.hpp"
#include "cutpost/experiments.hpp"

using namespace cutpost;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

template <class T>
void override_if(const CLI::Option* opt, T& target, const T& value) {
  if (opt->count() > 0) target = value;
}

std::vector<DesignMethod> parse_samplers(const std::vector<std::string>& names) {
  std::vector<DesignMethod> out;
  for (const auto& n : names) out.push_back(parse_design_method(n));
  return out;
}

void print_table(const Table& t) {
  std::cout << t.name << "\n";
  for (std::size_t j = 0; j < t.columns.size(); ++j) std::cout << (j ? "\t" : "  ") << t.columns[j];
  std::cout << "\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t j = 0; j < t.columns.size(); ++j) std::cout << (j ? "\t" : "  ") << t.text(r, t.columns[j]);
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmarks for cut-distribution approximations"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(CUTPOST_VERSION));

  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out_dir = ".";
  std::string format = "csv";
  std::string preset_name = "desk";
  bool timing = false;
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--threads", threads, "Worker threads (0: all cores)");
  app.add_option("--out-dir", out_dir, "Directory for output files");
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--preset", preset_name, "Scale of the defaults")->check(CLI::IsMember({"desk", "paper"}));
  app.add_flag("--timing", timing, "Record wall time per cell (files then differ between runs)");

  // db-benchmark
  auto* db = app.add_subcommand("db-benchmark", "Diamond-in-a-box: KS to the analytic cut distribution");
  std::vector<std::size_t> db_budgets;
  std::size_t db_reps = 0, db_total = 0, db_m = 0, db_M = 0;
  std::vector<std::string> db_methods, db_samplers;
  auto* db_budgets_opt = db->add_option("--budgets", db_budgets, "Budgets L");
  auto* db_reps_opt = db->add_option("--reps", db_reps, "Replicates");
  auto* db_methods_opt = db->add_option("--methods", db_methods, "ds, ds-normal, ecp, ecp-laplace, seq-ecp");
  auto* db_samplers_opt = db->add_option("--samplers", db_samplers, "iid, lhs, sp, mined");
  auto* db_total_opt = db->add_option("--total-draws", db_total, "Draws per method");
  auto* db_m_opt = db->add_option("--ecp-m", db_m, "ECP draws per training location");
  auto* db_M_opt = db->add_option("--ecp-M", db_M, "ECP prediction locations");

  // doe-compare
  auto* doe = app.add_subcommand("doe-compare", "Designs against the box-weight distribution");
  std::size_t doe_L = 0, doe_reps = 0;
  std::vector<std::string> doe_samplers;
  auto* doe_L_opt = doe->add_option("--L", doe_L, "Design size");
  auto* doe_reps_opt = doe->add_option("--reps", doe_reps, "Replicates");
  auto* doe_samplers_opt = doe->add_option("--samplers", doe_samplers, "iid, lhs, sp, mined");

  // eco-benchmark
  auto* eco = app.add_subcommand("eco-benchmark", "Ecological example: per-marginal KS to a DS ground truth");
  std::vector<std::size_t> eco_budgets;
  std::vector<std::string> eco_methods;
  std::size_t eco_reps = 0, eco_gt = 0, eco_pool = 0, eco_M = 0, eco_m = 0, eco_total = 0;
  auto* eco_budgets_opt = eco->add_option("--budgets", eco_budgets, "Budgets L");
  auto* eco_methods_opt = eco->add_option("--methods", eco_methods, "ds, ds-normal, ecp");
  auto* eco_reps_opt = eco->add_option("--reps", eco_reps, "Replicates");
  auto* eco_gt_opt = eco->add_option("--ground-truth-L", eco_gt, "Locations of the ground-truth run (m=1)");
  auto* eco_pool_opt = eco->add_option("--pool-draws", eco_pool, "Posterior draws of gamma");
  auto* eco_M_opt = eco->add_option("--prediction-size", eco_M, "Shared ECP prediction locations");
  auto* eco_m_opt = eco->add_option("--ecp-m", eco_m, "ECP draws per training location");
  auto* eco_total_opt = eco->add_option("--total-draws", eco_total, "DS draws per run (m = total / L)");

  // coverage
  auto* cov = app.add_subcommand("coverage", "Interval coverage under misspecification");
  std::string cov_sweep = "sigma-star";
  std::vector<double> cov_grid;
  std::size_t cov_reps = 0;
  cov->add_option("--sweep", cov_sweep, "sigma-star or sigma-gamma-star")
      ->check(CLI::IsMember({"sigma-star", "sigma-gamma-star"}));
  auto* cov_grid_opt = cov->add_option("--grid", cov_grid, "Generating sd values");
  auto* cov_reps_opt = cov->add_option("--reps", cov_reps, "Replicates per grid value");

  // seq-demo
  auto* seq = app.add_subcommand("seq-demo", "Sequential against one-shot ECP on diamond-in-a-box");
  std::size_t seq_L0 = 0, seq_L = 0, seq_reps = 0, seq_cand = 0;
  bool seq_mc = false;
  auto* seq_L0_opt = seq->add_option("--L0", seq_L0, "Initial budget");
  auto* seq_L_opt = seq->add_option("--L", seq_L, "Final budget");
  auto* seq_reps_opt = seq->add_option("--reps", seq_reps, "Replicates");
  auto* seq_cand_opt = seq->add_option("--candidates", seq_cand, "Candidates per round");
  auto* seq_mc_opt = seq->add_flag("--monte-carlo", seq_mc, "Score candidates by Monte Carlo");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  RunOptions options;
  std::string command;
  std::string config_json;
  std::vector<Table> tables;
  try {
    options.seed = seed;
    options.threads = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    options.out_dir = out_dir;
    options.format = parse_output_format(format);
    options.preset = parse_preset(preset_name);
    options.timing = timing;

    if (*db) {
      command = "db-benchmark";
      auto cfg = DbBenchmarkConfig::preset(options.preset);
      override_if(db_budgets_opt, cfg.budgets, db_budgets);
      override_if(db_reps_opt, cfg.reps, db_reps);
      override_if(db_methods_opt, cfg.methods, db_methods);
      if (db_samplers_opt->count() > 0) cfg.samplers = parse_samplers(db_samplers);
      override_if(db_total_opt, cfg.total_draws, db_total);
      override_if(db_m_opt, cfg.ecp_samples_per_location, db_m);
      override_if(db_M_opt, cfg.ecp_prediction_size, db_M);
      cfg.validate();
      config_json = cfg.to_json();
      tables = run_db_benchmark(cfg, options);
    } else if (*doe) {
      command = "doe-compare";
      auto cfg = DoeCompareConfig::preset(options.preset);
      override_if(doe_L_opt, cfg.L, doe_L);
      override_if(doe_reps_opt, cfg.reps, doe_reps);
      if (doe_samplers_opt->count() > 0) cfg.samplers = parse_samplers(doe_samplers);
      cfg.validate();
      config_json = cfg.to_json();
      tables = run_doe_compare(cfg, options);
    } else if (*eco) {
      command = "eco-benchmark";
      auto cfg = EcoBenchmarkConfig::preset(options.preset);
      override_if(eco_budgets_opt, cfg.budgets, eco_budgets);
      override_if(eco_methods_opt, cfg.methods, eco_methods);
      override_if(eco_reps_opt, cfg.reps, eco_reps);
      override_if(eco_gt_opt, cfg.ground_truth_L, eco_gt);
      override_if(eco_pool_opt, cfg.pool_draws, eco_pool);
      override_if(eco_M_opt, cfg.prediction_size, eco_M);
      override_if(eco_m_opt, cfg.ecp_samples_per_location, eco_m);
      override_if(eco_total_opt, cfg.total_draws, eco_total);
      cfg.validate();
      config_json = cfg.to_json();
      tables = run_eco_benchmark(cfg, options);
    } else if (*cov) {
      command = "coverage";
      auto cfg = CoverageConfig::preset(options.preset);
      cfg.sweep = cov_sweep == "sigma-star" ? CoverageSweep::sigma_star : CoverageSweep::sigma_gamma_star;
      override_if(cov_grid_opt, cfg.grid, cov_grid);
      override_if(cov_reps_opt, cfg.reps, cov_reps);
      cfg.validate();
      config_json = cfg.to_json();
      tables = run_coverage(cfg, options);
    } else if (*seq) {
      command = "seq-demo";
      auto cfg = SeqDemoConfig::preset(options.preset);
      override_if(seq_L0_opt, cfg.build_budget, seq_L0);
      override_if(seq_L_opt, cfg.budget, seq_L);
      override_if(seq_reps_opt, cfg.reps, seq_reps);
      override_if(seq_cand_opt, cfg.candidates, seq_cand);
      override_if(seq_mc_opt, cfg.monte_carlo, seq_mc);
      cfg.validate();
      config_json = cfg.to_json();
      tables = run_seq_demo(cfg, options);
    }

    const RunHeader header{command, config_json, options.seed};
    for (const auto& t : tables) {
      write_table(t, header, options);
      if (t.name.find("summary") != std::string::npos || t.name == "coverage") print_table(t);
    }
  } catch (const Error& e) {
    std::cerr << "cutbench: " << e.what() << "\n";
    const bool config = e.kind() == ErrorKind::config || e.kind() == ErrorKind::argument;
    return config ? kConfigError : kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "cutbench: " << e.what() << "\n";
    return kNumericalError;
  }
  return 0;
}
