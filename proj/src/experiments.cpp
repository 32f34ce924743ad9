#include "cutpost/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <memory>
#include <sstream>

#include "cutpost/cutcore.hpp"
#include "cutpost/error.hpp"
#include "cutpost/parallel.hpp"
#include "cutpost/problems.hpp"
#include "cutpost/seqecp.hpp"

namespace cutpost {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

Error config_error(const std::string& what) { return Error(ErrorKind::config, what); }

double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> column_of(const Eigen::MatrixXd& draws, Eigen::Index j) {
  std::vector<double> out(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index i = 0; i < draws.rows(); ++i) out[static_cast<std::size_t>(i)] = draws(i, j);
  return out;
}

Cell wall_cell(const RunOptions& options, Clock::time_point start) {
  if (!options.timing) return std::monostate{};
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

template <class T>
Cell integer(T v) {
  return static_cast<std::int64_t>(v);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_cell(const Cell& c) {
  if (std::holds_alternative<std::monostate>(c)) return "NA";
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

json json_cell(const Cell& c) {
  if (std::holds_alternative<std::monostate>(c)) return nullptr;
  if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
  if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? json(*d) : json(nullptr);
  return std::get<std::string>(c);
}

bool cell_equal(const Cell& a, const Cell& b) {
  if (a.index() == b.index()) return a == b;
  auto as_num = [](const Cell& c, double& out) {
    if (const auto* i = std::get_if<std::int64_t>(&c)) return out = static_cast<double>(*i), true;
    if (const auto* d = std::get_if<double>(&c)) return out = *d, true;
    return false;
  };
  double x = 0, y = 0;
  return as_num(a, x) && as_num(b, y) && x == y;
}

std::vector<std::string> sampler_names(const std::vector<DesignMethod>& samplers) {
  std::vector<std::string> out;
  for (auto s : samplers) out.emplace_back(sampler_name(s));
  return out;
}

void require_budgets(const std::vector<std::size_t>& budgets, std::size_t min_budget) {
  if (budgets.empty()) throw config_error("at least one budget is required");
  for (auto L : budgets)
    if (L < min_budget) throw config_error("budget " + std::to_string(L) + " is below " + std::to_string(min_budget));
}

void require_methods(const std::vector<std::string>& methods, const std::vector<std::string>& allowed) {
  if (methods.empty()) throw config_error("at least one method is required");
  for (const auto& m : methods)
    if (std::find(allowed.begin(), allowed.end(), m) == allowed.end()) throw config_error("unknown method '" + m + "'");
}

/// Evaluates a KDE of `values` on an evenly spaced grid and appends rows.
void append_kde(Table& table, const std::vector<Cell>& prefix, const std::vector<double>& values, double lo, double hi,
                std::size_t points) {
  const Kde kde(values);
  const auto dens = kde.evaluate_grid(lo, hi, points);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    auto row = prefix;
    row.emplace_back(x);
    row.emplace_back(dens[i]);
    table.rows.push_back(std::move(row));
  }
}

std::pair<double, double> padded_range(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double pad = 0.1 * (*hi - *lo);
  return {*lo - pad, *hi + pad};
}

// Diamond-in-a-box data of one replicate.
struct DbReplicate {
  DbConfig cfg;
  DbData data;
  ProblemSpec problem;
  FamilyParams cut;

  explicit DbReplicate(const RngStream& rep) {
    RngStream r = rep.derive("data");
    data = db_summarize(cfg, db_generate(cfg, r));
    problem = make_db_problem(cfg, data);
    cut = db_cut_analytic(cfg, data.ybar1, data.ybar2);
  }

  double ks(const Eigen::MatrixXd& draws) const {
    return ks_to_cdf(column_of(draws, 0), [this](double x) { return cdf(cut, x); }).distance;
  }
};

EcpConfig db_ecp_config(std::size_t L, DesignMethod sampler, std::size_t m, std::size_t M) {
  EcpConfig c;
  c.budget = L;
  c.design = sampler;
  c.samples_per_location = m;
  c.prediction_size = M;
  return c;
}

/// Draws of one DB method at one cell.
Eigen::MatrixXd db_method_draws(const DbReplicate& rep, const std::string& method, DesignMethod sampler, std::size_t L,
                                const DbBenchmarkConfig& cfg, const RngStream& cell) {
  const std::size_t n = cfg.total_draws;
  if (method == "ds" || method == "ds-normal") {
    auto approx = direct_sample(rep.problem, L, std::max<std::size_t>(1, n / L), sampler, cell);
    if (method == "ds") return approx.raw().draws;
    RngStream r = cell.derive("aggregate");
    return little_aggregate(approx).sample(n, r);
  }
  EcpConfig c = db_ecp_config(L, sampler, cfg.ecp_samples_per_location, cfg.ecp_prediction_size);
  RngStream r = cell.derive("draws");
  if (method == "seq-ecp") {
    SeqEcpConfig sc;
    sc.ecp = c;
    return sequential_ecp(rep.problem, sc, cell).ecp.approximation.sample(n, r);
  }
  if (method == "ecp-laplace") c.phase1 = Phase1Method::laplace;
  return ecp_sample(rep.problem, c, cell).approximation.sample(n, r);
}

const std::vector<std::string> kDbMethods = {"ds", "ds-normal", "ecp", "ecp-laplace", "seq-ecp"};
const std::vector<std::string> kEcoMethods = {"ds", "ds-normal", "ecp"};

}  // namespace

// ---------------------------------------------------------------------------

Preset parse_preset(const std::string& text) {
  if (text == "desk") return Preset::desk;
  if (text == "paper") return Preset::paper;
  throw config_error("unknown preset '" + text + "'");
}

OutputFormat parse_output_format(const std::string& text) {
  if (text == "csv") return OutputFormat::csv;
  if (text == "json") return OutputFormat::json;
  throw config_error("unknown output format '" + text + "'");
}

const char* to_string(Preset preset) { return preset == Preset::desk ? "desk" : "paper"; }

const char* sampler_name(DesignMethod method) {
  switch (method) {
    case DesignMethod::iid: return "iid";
    case DesignMethod::lhs: return "lhs";
    case DesignMethod::support: return "sp";
    case DesignMethod::mined: return "mined";
  }
  return "?";
}

std::size_t Table::column(const std::string& name_) const {
  const auto it = std::find(columns.begin(), columns.end(), name_);
  if (it == columns.end()) throw Error(ErrorKind::argument, "table " + name + " has no column " + name_);
  return static_cast<std::size_t>(it - columns.begin());
}

double Table::number(std::size_t row, const std::string& col) const {
  const Cell& c = rows.at(row).at(column(col));
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&c)) return *d;
  return std::nan("");
}

std::string Table::text(std::size_t row, const std::string& col) const { return csv_cell(rows.at(row).at(column(col))); }

double median_where(const Table& table, const std::string& column,
                    const std::vector<std::pair<std::string, Cell>>& match) {
  std::vector<std::size_t> keys;
  for (const auto& [name, value] : match) keys.push_back(table.column(name));
  const std::size_t target = table.column(column);
  std::vector<double> values;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    bool ok = true;
    for (std::size_t k = 0; k < keys.size() && ok; ++k) ok = cell_equal(table.rows[r][keys[k]], match[k].second);
    if (ok) values.push_back(table.number(r, table.columns[target]));
  }
  return median_of(values);
}

std::string format_table(const Table& table, const RunHeader& header, OutputFormat format) {
  std::ostringstream os;
  if (format == OutputFormat::csv) {
    os << "# cutbench " << CUTPOST_VERSION << "\n";
    os << "# command: " << header.command << "\n";
    os << "# config: " << header.config_json << "\n";
    os << "# seed: " << header.seed << "\n";
    for (std::size_t j = 0; j < table.columns.size(); ++j) os << (j ? "," : "") << table.columns[j];
    os << "\n";
    for (const auto& row : table.rows) {
      for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << csv_cell(row[j]);
      os << "\n";
    }
    return os.str();
  }
  json j;
  j["tool"] = "cutbench";
  j["version"] = CUTPOST_VERSION;
  j["command"] = header.command;
  j["config"] = json::parse(header.config_json);
  j["seed"] = header.seed;
  j["table"] = table.name;
  j["columns"] = table.columns;
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r = json::array();
    for (const auto& c : row) r.push_back(json_cell(c));
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(1) + "\n";
}

void write_table(const Table& table, const RunHeader& header, const RunOptions& options) {
  std::filesystem::create_directories(options.out_dir);
  const auto path = options.out_dir / (table.name + (options.format == OutputFormat::csv ? ".csv" : ".json"));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::config, "cannot write " + path.string());
  out << format_table(table, header, options.format);
  if (!out) throw Error(ErrorKind::config, "failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Diamond-in-a-box benchmark.

DbBenchmarkConfig DbBenchmarkConfig::preset(Preset preset) {
  DbBenchmarkConfig c;
  if (preset == Preset::desk) {
    c.budgets = {10, 50, 250};
    c.methods = {"ds", "ds-normal", "ecp"};
    c.samplers = {DesignMethod::iid, DesignMethod::support};
  } else {
    c.budgets = {10, 25, 50, 100, 250, 500};
    c.methods = kDbMethods;
    c.samplers = {DesignMethod::iid, DesignMethod::lhs, DesignMethod::support, DesignMethod::mined};
  }
  return c;
}

void DbBenchmarkConfig::validate() const {
  require_budgets(budgets, 1);
  require_methods(methods, kDbMethods);
  if (samplers.empty()) throw config_error("at least one sampler is required");
  if (reps == 0) throw config_error("reps must be positive");
  if (total_draws < 2) throw config_error("total_draws must be at least 2");
  DbReplicate probe(RngStream(0));
  for (auto L : budgets) {
    if (L > total_draws) throw config_error("budget exceeds total_draws");
    for (const auto& m : methods) {
      if (m.rfind("ecp", 0) != 0 && m != "seq-ecp") continue;
      for (auto s : samplers) {
        auto c = db_ecp_config(L, s, ecp_samples_per_location, ecp_prediction_size);
        try {
          c.validate(probe.problem);
        } catch (const Error& e) {
          throw config_error(m + " at L=" + std::to_string(L) + ": " + e.what());
        }
      }
    }
  }
}

std::string DbBenchmarkConfig::to_json() const {
  json j;
  j["budgets"] = budgets;
  j["reps"] = reps;
  j["methods"] = methods;
  j["samplers"] = sampler_names(samplers);
  j["total_draws"] = total_draws;
  j["ecp_samples_per_location"] = ecp_samples_per_location;
  j["ecp_prediction_size"] = ecp_prediction_size;
  return j.dump();
}

std::vector<Table> run_db_benchmark(const DbBenchmarkConfig& cfg, const RunOptions& options) {
  cfg.validate();
  struct CellSpec {
    std::size_t rep, L;
    std::string method;
    DesignMethod sampler;
  };
  std::vector<CellSpec> cells;
  for (std::size_t rep = 0; rep < cfg.reps; ++rep)
    for (auto L : cfg.budgets)
      for (const auto& m : cfg.methods)
        for (auto s : cfg.samplers) cells.push_back({rep, L, m, s});

  std::vector<std::unique_ptr<DbReplicate>> reps(cfg.reps);
  parallel_for(cfg.reps, options.threads,
               [&](std::size_t r) { reps[r] = std::make_unique<DbReplicate>(RngStream(options.seed + r)); });

  Table ks{"db_ks", {"method", "sampler", "L", "rep", "seed", "ks", "log_ks", "wall_ms"}, {}};
  ks.rows.resize(cells.size());
  parallel_for(cells.size(), options.threads, [&](std::size_t i) {
    const auto& c = cells[i];
    const auto start = Clock::now();
    const std::uint64_t seed = options.seed + c.rep;
    // ds-normal aggregates the very draws ds produced.
    const std::string label = c.method == "ds-normal" ? "ds" : c.method;
    const RngStream cell = RngStream(seed).derive(label).derive(sampler_name(c.sampler)).derive(c.L);
    const double d = reps[c.rep]->ks(db_method_draws(*reps[c.rep], c.method, c.sampler, c.L, cfg, cell));
    ks.rows[i] = {c.method, sampler_name(c.sampler), integer(c.L), integer(c.rep), integer(seed), d,
                  std::log10(d), wall_cell(options, start)};
  });

  Table summary{"db_summary", {"method", "sampler", "L", "reps", "median_ks", "median_log_ks"}, {}};
  for (const auto& m : cfg.methods)
    for (auto s : cfg.samplers)
      for (auto L : cfg.budgets) {
        const std::vector<std::pair<std::string, Cell>> key = {
            {"method", m}, {"sampler", std::string(sampler_name(s))}, {"L", integer(L)}};
        summary.rows.push_back({m, sampler_name(s), integer(L), integer(cfg.reps), median_where(ks, "ks", key),
                                median_where(ks, "log_ks", key)});
      }
  return {ks, summary};
}

// ---------------------------------------------------------------------------
// Designs against the known box-weight distribution.

DoeCompareConfig DoeCompareConfig::preset(Preset) {
  DoeCompareConfig c;
  c.samplers = {DesignMethod::iid, DesignMethod::lhs, DesignMethod::support, DesignMethod::mined};
  return c;
}

void DoeCompareConfig::validate() const {
  if (L == 0) throw config_error("L must be positive");
  if (reps == 0) throw config_error("reps must be positive");
  if (samplers.empty()) throw config_error("at least one sampler is required");
  if (kde_points < 2) throw config_error("kde_points must be at least 2");
}

std::string DoeCompareConfig::to_json() const {
  json j;
  j["L"] = L;
  j["reps"] = reps;
  j["samplers"] = sampler_names(samplers);
  j["kde_points"] = kde_points;
  return j.dump();
}

std::vector<Table> run_doe_compare(const DoeCompareConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const DbConfig db;
  const ProblemSpec problem = make_db_problem(db, DbData{1.0, 11.0});
  const FamilyParams target = make_normal(db.mu_gamma, db.sigma_gamma);

  const std::size_t S = cfg.samplers.size();
  std::vector<std::vector<double>> designs(cfg.reps * S);
  Table ks{"doe_ks", {"sampler", "L", "rep", "seed", "ks", "wall_ms"}, {}};
  ks.rows.resize(cfg.reps * S);
  parallel_for(cfg.reps * S, options.threads, [&](std::size_t i) {
    const std::size_t rep = i / S;
    const DesignMethod s = cfg.samplers[i % S];
    const auto start = Clock::now();
    const std::uint64_t seed = options.seed + rep;
    RngStream r = RngStream(seed).derive("design").derive(sampler_name(s));
    designs[i] = column_of(make_design(problem, s, cfg.L, r).points, 0);
    const double d = ks_to_cdf(designs[i], [&](double x) { return cdf(target, x); }).distance;
    ks.rows[i] = {sampler_name(s), integer(cfg.L), integer(rep), integer(seed), d, wall_cell(options, start)};
  });

  Table kde{"doe_kde", {"sampler", "x", "density"}, {}};
  const double lo = db.mu_gamma - 4 * db.sigma_gamma, hi = db.mu_gamma + 4 * db.sigma_gamma;
  for (std::size_t k = 0; k < S; ++k) {
    if (cfg.L < 2) continue;
    append_kde(kde, {sampler_name(cfg.samplers[k])}, designs[k], lo, hi, cfg.kde_points);
  }

  Table summary{"doe_summary", {"sampler", "L", "reps", "median_ks"}, {}};
  for (auto s : cfg.samplers)
    summary.rows.push_back({sampler_name(s), integer(cfg.L), integer(cfg.reps),
                            median_where(ks, "ks", {{"sampler", std::string(sampler_name(s))}})});
  return {ks, kde, summary};
}

// ---------------------------------------------------------------------------
// Ecological benchmark.

EcoBenchmarkConfig EcoBenchmarkConfig::preset(Preset preset) {
  EcoBenchmarkConfig c;
  c.methods = kEcoMethods;
  if (preset == Preset::desk) {
    c.budgets = {25, 50, 100};
  } else {
    c.budgets = {10, 25, 50, 100, 250, 1000};
    c.reps = 25;
    c.ground_truth_L = 10000;
    c.pool_draws = 90000;
    c.prediction_size = 10000;
  }
  return c;
}

void EcoBenchmarkConfig::validate() const {
  require_budgets(budgets, 3);
  require_methods(methods, kEcoMethods);
  if (reps == 0) throw config_error("reps must be positive");
  if (ground_truth_L < 2) throw config_error("ground_truth_L must be at least 2");
  if (pool_draws < ground_truth_L || pool_draws < prediction_size)
    throw config_error("pool_draws must cover ground_truth_L and prediction_size");
  if (prediction_size == 0 || draws_per_component == 0) throw config_error("prediction sizes must be positive");
  if (ecp_samples_per_location < 10) throw config_error("ecp_samples_per_location must be at least 10");
  if (!(inflate_omega >= 0.0)) throw config_error("inflate_omega must be nonnegative");
  if (kde_points < 2) throw config_error("kde_points must be at least 2");
  for (auto L : budgets) {
    if (L > pool_draws) throw config_error("budget exceeds the pool size");
    if (L > total_draws) throw config_error("budget exceeds total_draws");
  }
}

std::string EcoBenchmarkConfig::to_json() const {
  json j;
  j["budgets"] = budgets;
  j["reps"] = reps;
  j["methods"] = methods;
  j["ground_truth_L"] = ground_truth_L;
  j["pool_draws"] = pool_draws;
  j["pool_burn_in"] = pool_burn_in;
  j["total_draws"] = total_draws;
  j["ecp_samples_per_location"] = ecp_samples_per_location;
  j["prediction_size"] = prediction_size;
  j["draws_per_component"] = draws_per_component;
  j["inflate_up_to"] = inflate_up_to;
  j["inflate_omega"] = inflate_omega;
  j["kde_points"] = kde_points;
  return j.dump();
}

std::vector<Table> run_eco_benchmark(const EcoBenchmarkConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const EcoData& data = eco_data();
  EcoPoolConfig pc;
  pc.draws = cfg.pool_draws;
  pc.burn_in = cfg.pool_burn_in;
  pc.seed = options.seed;
  const auto pool = std::make_shared<const Eigen::MatrixXd>(eco_gamma_pool(data, pc));
  const ProblemSpec problem = make_eco_problem(data, pool);
  const RngStream root(options.seed);

  // Ground truth: one draw at each of ground_truth_L pool members.
  RngStream pick = root.derive("truth").derive("locations");
  Eigen::MatrixXd truth_gamma(static_cast<Eigen::Index>(cfg.ground_truth_L), problem.q);
  for (Eigen::Index i = 0; i < truth_gamma.rows(); ++i)
    truth_gamma.row(i) = pool->row(static_cast<Eigen::Index>(pick.below(static_cast<std::uint64_t>(pool->rows()))));
  const Eigen::MatrixXd truth =
      direct_sample_at(problem, truth_gamma, 1, root.derive("truth").derive("chains"), options.threads).raw().draws;

  // Shared prediction set for every ECP fit.
  RngStream pr = root.derive("prediction");
  SupportOptions sopt;
  sopt.max_iterations = 100;
  const Eigen::MatrixXd prediction = support_points(*pool, cfg.prediction_size, pr, sopt).points;

  struct CellSpec {
    std::size_t rep, L;
    std::string method;
  };
  std::vector<CellSpec> cells;
  for (std::size_t rep = 0; rep < cfg.reps; ++rep)
    for (auto L : cfg.budgets)
      for (const auto& m : cfg.methods) cells.push_back({rep, L, m});

  const int p = problem.p;
  std::vector<std::vector<double>> truth_cols;
  for (int j = 0; j < p; ++j) truth_cols.push_back(column_of(truth, j));

  Table ks{"eco_ks", {"method", "L", "rep", "seed", "ks_alpha1", "ks_alpha2", "ks_max", "ks_mean", "wall_ms"}, {}};
  ks.rows.resize(cells.size());
  std::vector<Eigen::MatrixXd> first_rep(cells.size());
  parallel_for(cells.size(), options.threads, [&](std::size_t i) {
    const auto& c = cells[i];
    const auto start = Clock::now();
    const std::uint64_t seed = options.seed + c.rep;
    const std::string label = c.method == "ds-normal" ? "ds" : c.method;
    const RngStream cell = RngStream(seed).derive(label).derive(c.L);
    Eigen::MatrixXd draws;
    if (c.method == "ecp") {
      EcpConfig ec;
      ec.budget = c.L;
      ec.samples_per_location = cfg.ecp_samples_per_location;
      ec.family = FamilyTag::mvn(p);
      ec.prediction_points = prediction;
      if (c.L <= cfg.inflate_up_to && cfg.inflate_omega > 0.0) ec.inflate = InflationSpec{cfg.inflate_omega};
      RngStream r = cell.derive("draws");
      draws = ecp_sample(problem, ec, cell).approximation.sample(cfg.draws_per_component * cfg.prediction_size, r);
    } else {
      auto approx = direct_sample(problem, c.L, cfg.total_draws / c.L, DesignMethod::support, cell);
      if (c.method == "ds") {
        draws = approx.raw().draws;
      } else {
        RngStream r = cell.derive("aggregate");
        draws = little_aggregate(approx).sample(cfg.total_draws, r);
      }
    }
    std::vector<double> d(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) d[static_cast<std::size_t>(j)] = ks_two_sample(column_of(draws, j), truth_cols[static_cast<std::size_t>(j)]).distance;
    const double worst = *std::max_element(d.begin(), d.end());
    double mean = 0.0;
    for (double v : d) mean += v / p;
    ks.rows[i] = {c.method, integer(c.L), integer(c.rep), integer(seed), d[0], d[1], worst, mean,
                  wall_cell(options, start)};
    if (c.rep == 0) first_rep[i] = std::move(draws);
  });

  Table summary{"eco_summary", {"method", "L", "reps", "median_ks_alpha1", "median_ks_alpha2", "median_ks_max"}, {}};
  for (const auto& m : cfg.methods)
    for (auto L : cfg.budgets) {
      const std::vector<std::pair<std::string, Cell>> key = {{"method", m}, {"L", integer(L)}};
      summary.rows.push_back({m, integer(L), integer(cfg.reps), median_where(ks, "ks_alpha1", key),
                              median_where(ks, "ks_alpha2", key), median_where(ks, "ks_max", key)});
    }

  Table kde{"eco_kde", {"source", "L", "margin", "x", "density"}, {}};
  for (int j = 0; j < p; ++j) {
    const auto [lo, hi] = padded_range(truth_cols[static_cast<std::size_t>(j)]);
    const std::string margin = "alpha" + std::to_string(j + 1);
    append_kde(kde, {std::string("truth"), integer(cfg.ground_truth_L), margin}, truth_cols[static_cast<std::size_t>(j)], lo,
               hi, cfg.kde_points);
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i].rep == 0)
        append_kde(kde, {cells[i].method, integer(cells[i].L), margin}, column_of(first_rep[i], j), lo, hi,
                   cfg.kde_points);
  }

  Table gamma_kde{"eco_gamma_kde", {"margin", "x", "density"}, {}};
  for (Eigen::Index j = 0; j < pool->cols(); ++j) {
    const auto col = column_of(*pool, j);
    const auto [lo, hi] = padded_range(col);
    append_kde(gamma_kde, {"gamma" + std::to_string(j + 1)}, col, lo, hi, cfg.kde_points);
  }
  return {ks, summary, kde, gamma_kde};
}

// ---------------------------------------------------------------------------
// Misspecification coverage study.

CoverageConfig CoverageConfig::preset(Preset preset) {
  CoverageConfig c;
  if (preset == Preset::desk) {
    c.grid = {0.1, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0};
  } else {
    for (int i = 1; i <= 60; ++i) c.grid.push_back(0.1 * i);
    c.reps = 10000;
  }
  return c;
}

void CoverageConfig::validate() const {
  if (grid.empty()) throw config_error("the grid must not be empty");
  for (double g : grid)
    if (!(g > 0.0) || !std::isfinite(g)) throw config_error("grid values must be positive and finite");
  if (reps < 2) throw config_error("reps must be at least 2");
}

std::string CoverageConfig::to_json() const {
  json j;
  j["sweep"] = sweep == CoverageSweep::sigma_star ? "sigma-star" : "sigma-gamma-star";
  j["grid"] = grid;
  j["reps"] = reps;
  return j.dump();
}

std::vector<Table> run_coverage(const CoverageConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const auto rows = coverage_study(coverage_default_config(), cfg.sweep, cfg.grid, cfg.reps, options.seed, options.threads);
  Table t{"coverage", {"setting", "method", "coverage", "mse", "reps", "seed"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({r.setting, r.method, r.coverage, r.mse, integer(r.reps), integer(r.seed)});
  return {t};
}

// ---------------------------------------------------------------------------
// Sequential design demonstration.

SeqDemoConfig SeqDemoConfig::preset(Preset) { return {}; }

void SeqDemoConfig::validate() const {
  if (build_budget < 3) throw config_error("the build budget must be at least 3");
  if (budget < build_budget) throw config_error("the final budget must not be below the build budget");
  if (reps == 0) throw config_error("reps must be positive");
  if (candidates == 0) throw config_error("candidates must be positive");
  if (total_draws < 2) throw config_error("total_draws must be at least 2");
  DbReplicate probe(RngStream(0));
  SeqEcpConfig sc;
  sc.ecp = db_ecp_config(budget, DesignMethod::support, ecp_samples_per_location, ecp_prediction_size);
  sc.build_budget = build_budget;
  sc.candidates = candidates;
  try {
    sc.ecp.validate(probe.problem);
    sc.validate(probe.problem);
  } catch (const Error& e) {
    throw config_error(e.what());
  }
}

std::string SeqDemoConfig::to_json() const {
  json j;
  j["build_budget"] = build_budget;
  j["budget"] = budget;
  j["reps"] = reps;
  j["candidates"] = candidates;
  j["monte_carlo"] = monte_carlo;
  j["total_draws"] = total_draws;
  j["ecp_samples_per_location"] = ecp_samples_per_location;
  j["ecp_prediction_size"] = ecp_prediction_size;
  return j.dump();
}

std::vector<Table> run_seq_demo(const SeqDemoConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const std::vector<std::string> methods = {"ecp", "seq-ecp"};
  const std::size_t cells = cfg.reps * methods.size();
  std::vector<std::vector<SeqRound>> traces(cells);
  Table ks{"seq_ks", {"method", "L0", "L", "rep", "seed", "ks", "wall_ms"}, {}};
  ks.rows.resize(cells);
  parallel_for(cells, options.threads, [&](std::size_t i) {
    const std::size_t rep = i / methods.size();
    const std::string& method = methods[i % methods.size()];
    const auto start = Clock::now();
    const std::uint64_t seed = options.seed + rep;
    const DbReplicate db{RngStream(seed)};
    const RngStream cell = RngStream(seed).derive("demo");
    EcpConfig ec = db_ecp_config(cfg.budget, DesignMethod::support, cfg.ecp_samples_per_location, cfg.ecp_prediction_size);
    RngStream r = cell.derive("draws");
    Eigen::MatrixXd draws;
    if (method == "ecp") {
      draws = ecp_sample(db.problem, ec, cell).approximation.sample(cfg.total_draws, r);
    } else {
      SeqEcpConfig sc;
      sc.ecp = ec;
      sc.build_budget = cfg.build_budget;
      sc.candidates = cfg.candidates;
      sc.monte_carlo = cfg.monte_carlo;
      auto res = sequential_ecp(db.problem, sc, cell);
      draws = res.ecp.approximation.sample(cfg.total_draws, r);
      traces[i] = std::move(res.trace);
    }
    ks.rows[i] = {method, integer(method == "ecp" ? cfg.budget : cfg.build_budget), integer(cfg.budget), integer(rep),
                  integer(seed), db.ks(draws), wall_cell(options, start)};
  });

  Table trace{"seq_trace", {"rep", "seed", "round", "gamma1", "score", "rejections", "fallback"}, {}};
  for (std::size_t i = 0; i < cells; ++i) {
    const std::size_t rep = i / methods.size();
    for (const auto& round : traces[i])
      trace.rows.push_back({integer(rep), integer(options.seed + rep), integer(round.round), round.gamma(0), round.score,
                            integer(round.rejections), integer(round.fallback ? 1 : 0)});
  }

  Table summary{"seq_summary", {"method", "reps", "median_ks"}, {}};
  for (const auto& m : methods)
    summary.rows.push_back({m, integer(cfg.reps), median_where(ks, "ks", {{"method", m}})});
  return {ks, trace, summary};
}

}  // namespace cutpost
