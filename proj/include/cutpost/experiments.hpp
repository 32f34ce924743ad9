#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "cutpost/diagnostics.hpp"
#include "cutpost/doe.hpp"

namespace cutpost {

// Batch experiments behind the cutbench tool. Every run derives one stream
// per replicate from the master seed (replicate r uses seed + r) and labels
// below that, so results never depend on the worker count.

enum class Preset { desk, paper };
enum class OutputFormat { csv, json };

Preset parse_preset(const std::string& text);
OutputFormat parse_output_format(const std::string& text);
const char* to_string(Preset preset);

/// Sampler names as used on the command line: iid, lhs, sp, mined.
const char* sampler_name(DesignMethod method);

/// Settings shared by all subcommands.
struct RunOptions {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::filesystem::path out_dir = ".";
  OutputFormat format = OutputFormat::csv;
  Preset preset = Preset::desk;
  /// Fill wall_ms; otherwise the column holds NA so files are reproducible.
  bool timing = false;
};

using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;

struct Table {
  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  /// Index of a column; throws when absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& column) const;
  std::string text(std::size_t row, const std::string& column) const;
};

/// Header lines shared by every file of one run.
struct RunHeader {
  std::string command;
  std::string config_json;  // resolved config, without the thread count
  std::uint64_t seed = 0;
};

/// CSV: '#' comment lines (tool version, command, config, seed), then the
/// column row. JSON: an object holding the same header fields and the rows.
void write_table(const Table& table, const RunHeader& header, const RunOptions& options);
std::string format_table(const Table& table, const RunHeader& header, OutputFormat format);

// ---------------------------------------------------------------------------

struct DbBenchmarkConfig {
  std::vector<std::size_t> budgets;
  std::size_t reps = 25;
  std::vector<std::string> methods;  // ds, ds-normal, ecp, ecp-laplace, seq-ecp
  std::vector<DesignMethod> samplers;
  std::size_t total_draws = 10000;
  std::size_t ecp_samples_per_location = 500;
  std::size_t ecp_prediction_size = 10000;

  static DbBenchmarkConfig preset(Preset preset);
  void validate() const;
  std::string to_json() const;
};

/// Tables: db_ks (method,sampler,L,rep,seed,ks,log_ks,wall_ms) and db_summary.
std::vector<Table> run_db_benchmark(const DbBenchmarkConfig& cfg, const RunOptions& options);

struct DoeCompareConfig {
  std::size_t L = 30;
  std::size_t reps = 25;
  std::vector<DesignMethod> samplers;
  std::size_t kde_points = 201;

  static DoeCompareConfig preset(Preset preset);
  void validate() const;
  std::string to_json() const;
};

/// Tables: doe_ks, doe_kde (first replicate), doe_summary.
std::vector<Table> run_doe_compare(const DoeCompareConfig& cfg, const RunOptions& options);

struct EcoBenchmarkConfig {
  std::vector<std::size_t> budgets;
  std::size_t reps = 5;
  std::vector<std::string> methods;  // ds, ds-normal, ecp
  std::size_t ground_truth_L = 2000;
  std::size_t pool_draws = 20000;
  std::size_t pool_burn_in = 5000;
  std::size_t total_draws = 100000;          // DS: m = total_draws / L
  std::size_t ecp_samples_per_location = 1000;
  std::size_t prediction_size = 2000;        // shared support points
  std::size_t draws_per_component = 10;
  /// Linear inflation of the training design at budgets up to this size.
  std::size_t inflate_up_to = 50;
  double inflate_omega = 0.1;
  std::size_t kde_points = 201;

  static EcoBenchmarkConfig preset(Preset preset);
  void validate() const;
  std::string to_json() const;
};

/// Tables: eco_ks (per-marginal KS against the ground truth), eco_summary,
/// eco_kde (first replicate), eco_gamma_kde.
std::vector<Table> run_eco_benchmark(const EcoBenchmarkConfig& cfg, const RunOptions& options);

struct CoverageConfig {
  CoverageSweep sweep = CoverageSweep::sigma_star;
  std::vector<double> grid;
  std::size_t reps = 5000;

  static CoverageConfig preset(Preset preset);
  void validate() const;
  std::string to_json() const;
};

/// Table: coverage (setting,method,coverage,mse,reps,seed).
std::vector<Table> run_coverage(const CoverageConfig& cfg, const RunOptions& options);

struct SeqDemoConfig {
  std::size_t build_budget = 5;  // L0
  std::size_t budget = 10;       // L
  std::size_t reps = 25;
  std::size_t candidates = 500;
  bool monte_carlo = false;
  std::size_t total_draws = 10000;
  std::size_t ecp_samples_per_location = 500;
  std::size_t ecp_prediction_size = 10000;

  static SeqDemoConfig preset(Preset preset);
  void validate() const;
  std::string to_json() const;
};

/// Tables: seq_ks (ecp vs seq-ecp), seq_trace, seq_summary.
std::vector<Table> run_seq_demo(const SeqDemoConfig& cfg, const RunOptions& options);

/// Median of a table column over the rows matching every (column, value) pair.
double median_where(const Table& table, const std::string& column,
                    const std::vector<std::pair<std::string, Cell>>& match);

}  // namespace cutpost
