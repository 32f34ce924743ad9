#include "cutpost/problems.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "cutpost/eco_data.hpp"
#include "cutpost/error.hpp"

namespace cutpost {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kAlphaPriorSd = 100.0;

}  // namespace

void ProblemSpec::validate() const {
  if (p < 1 || q < 1) throw Error(ErrorKind::config, "problem dimensions must be positive");
  if (!conditional) throw Error(ErrorKind::config, "problem has no conditional log-density");
  if (!prior.sampler && !prior.pool) throw Error(ErrorKind::config, "problem has neither a prior sampler nor a pool");
  if (alpha_bounds.dim() != p || gamma_bounds.dim() != q) throw Error(ErrorKind::shape, "problem bounds dimension mismatch");
  if (prior.pool && prior.pool->cols() != q) throw Error(ErrorKind::shape, "gamma pool has the wrong number of columns");
}

// ----------------------------------------------------------------------------- DB

double DbConfig::alpha_precision() const {
  return std::isinf(sigma_alpha) ? 0.0 : 1.0 / (sigma_alpha * sigma_alpha);
}

void DbConfig::validate() const {
  if (n1 < 1 || n2 < 0) throw Error(ErrorKind::argument, "DbConfig: n1 must be >= 1 and n2 >= 0");
  if (!(sigma >= 0.0 && sigma_alpha > 0.0 && sigma_gamma > 0.0))
    throw Error(ErrorKind::argument, "DbConfig: standard deviations must be positive");
}

Eigen::VectorXd db_generate(const DbConfig& cfg, RngStream& rng) {
  cfg.validate();
  const double noise = cfg.sigma_star.value_or(cfg.sigma);
  const double gamma = cfg.sigma_gamma_star ? rng.normal(cfg.mu_gamma, *cfg.sigma_gamma_star) : cfg.true_gamma;
  Eigen::VectorXd y(cfg.n1 + cfg.n2);
  for (int i = 0; i < cfg.n1; ++i) y(i) = cfg.true_alpha + noise * rng.normal();
  for (int i = 0; i < cfg.n2; ++i) y(cfg.n1 + i) = cfg.true_alpha + gamma + noise * rng.normal();
  return y;
}

DbData db_summarize(const DbConfig& cfg, const Eigen::VectorXd& y) {
  if (y.size() != cfg.n1 + cfg.n2) throw Error(ErrorKind::shape, "db_summarize: data length mismatch");
  DbData d;
  d.ybar1 = y.head(cfg.n1).mean();
  d.ybar2 = cfg.n2 > 0 ? y.tail(cfg.n2).mean() : 0.0;
  return d;
}

FamilyParams db_marginal_posterior(const DbConfig& cfg, double ybar1, double ybar2) {
  const double s2 = cfg.sigma * cfg.sigma;
  double precision = cfg.n1 / s2 + cfg.alpha_precision();
  double weighted = cfg.n1 * ybar1 / s2 + cfg.mu_alpha * cfg.alpha_precision();
  if (cfg.n2 > 0) {
    // ybar2 - mu_gamma ~ N(alpha, sigma^2/n2 + sigma_gamma^2) once gamma is integrated out.
    const double v2 = s2 / cfg.n2 + cfg.sigma_gamma * cfg.sigma_gamma;
    precision += 1.0 / v2;
    weighted += (ybar2 - cfg.mu_gamma) / v2;
  }
  return make_normal(weighted / precision, std::sqrt(1.0 / precision));
}

DbConditionalConstants db_conditional_constants(const DbConfig& cfg, double sum_y) {
  const double s2 = cfg.sigma * cfg.sigma;
  const double n = cfg.n1 + cfg.n2;
  DbConditionalConstants k;
  k.A = 1.0 / (n / s2 + cfg.alpha_precision());
  k.B = k.A * (sum_y / s2 + cfg.mu_alpha * cfg.alpha_precision());
  k.C = -k.A * cfg.n2 / s2;
  return k;
}

FamilyParams db_conditional(const DbConfig& cfg, double sum_y, double gamma) {
  const auto k = db_conditional_constants(cfg, sum_y);
  return make_normal(k.B + k.C * gamma, std::sqrt(k.A));
}

FamilyParams db_cut_analytic(const DbConfig& cfg, double ybar1, double ybar2) {
  const auto k = db_conditional_constants(cfg, cfg.n1 * ybar1 + cfg.n2 * ybar2);
  const double var = k.A + k.C * k.C * cfg.sigma_gamma * cfg.sigma_gamma;
  return make_normal(k.B + k.C * cfg.mu_gamma, std::sqrt(var));
}

double db_log_conditional(const DbConfig& cfg, const DbData& data, double alpha, double gamma) {
  const double s2 = cfg.sigma * cfg.sigma;
  const double r1 = data.ybar1 - alpha;
  const double r2 = data.ybar2 - alpha - gamma;
  double lp = -0.5 * (cfg.n1 * r1 * r1 + cfg.n2 * r2 * r2) / s2;
  const double ra = alpha - cfg.mu_alpha;
  lp -= 0.5 * ra * ra * cfg.alpha_precision();
  return lp;
}

ProblemSpec make_db_problem(const DbConfig& cfg, const DbData& data) {
  cfg.validate();
  ProblemSpec spec;
  spec.name = "diamond-in-a-box";
  spec.p = 1;
  spec.q = 1;
  const double mu = cfg.mu_gamma, sd = cfg.sigma_gamma;
  spec.prior.sampler = [mu, sd](RngStream& rng) { return Eigen::VectorXd::Constant(1, rng.normal(mu, sd)); };
  spec.prior.log_density = [mu, sd](const Eigen::VectorXd& g) {
    const double z = (g(0) - mu) / sd;
    return -0.5 * z * z;
  };
  spec.prior.quantiles = {[mu, sd](double u) { return mu + sd * normal_quantile(u); }};
  spec.conditional = [cfg, data](const Eigen::VectorXd& gamma) {
    const double g = gamma(0);
    return LogDensity([cfg, data, g](const Eigen::VectorXd& a) { return db_log_conditional(cfg, data, a(0), g); });
  };
  const double sum_y = cfg.n1 * data.ybar1 + cfg.n2 * data.ybar2;
  const auto k = db_conditional_constants(cfg, sum_y);
  spec.chain_start = [cfg, data, k](const Eigen::VectorXd& gamma) {
    ChainStart s;
    // Start at the data-only estimate; the chain's burn-in removes the offset.
    const double n = cfg.n1 + cfg.n2;
    s.init = Eigen::VectorXd::Constant(1, (cfg.n1 * data.ybar1 + cfg.n2 * (data.ybar2 - gamma(0))) / n);
    s.proposal_covariance = Eigen::MatrixXd::Constant(1, 1, k.A);
    s.step_scale = std::sqrt(k.A);
    return s;
  };
  spec.alpha_bounds = Bounds::unbounded(1);
  spec.gamma_bounds = Bounds::unbounded(1);
  spec.gamma_point = Eigen::VectorXd::Constant(1, cfg.mu_gamma);
  return spec;
}

// ---------------------------------------------------------------------------- Eco

std::uint64_t eco_content_hash(const std::string& text) { return hash_label(text); }

const std::uint64_t kEcoDataHash = 0x94cc4304e48a0fb1ULL;

EcoData eco_parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("Y,Z,N,T,C1", 0) != 0)
    throw Error(ErrorKind::data_integrity, "eco data: unexpected header");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != 9) throw Error(ErrorKind::data_integrity, "eco data: expected 9 columns");
    rows.push_back(std::move(row));
  }
  if (rows.size() != 13) throw Error(ErrorKind::data_integrity, "eco data: expected 13 populations");
  EcoData d;
  d.Y.resize(13);
  d.Z.resize(13);
  d.N.resize(13);
  d.T.resize(13);
  d.C.resize(13, 5);
  for (Eigen::Index j = 0; j < 13; ++j) {
    const auto& r = rows[static_cast<std::size_t>(j)];
    d.Y(j) = r[0];
    d.Z(j) = r[1];
    d.N(j) = r[2];
    d.T(j) = r[3];
    for (int k = 0; k < 5; ++k) d.C(j, k) = r[static_cast<std::size_t>(4 + k)];
  }
  return d;
}

EcoData eco_load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::data_integrity, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return eco_parse_csv(ss.str());
}

const EcoData& eco_data() {
  static const EcoData data = [] {
    const std::string text = detail::kEcoCsv;
    if (eco_content_hash(text) != kEcoDataHash)
      throw Error(ErrorKind::data_integrity, "embedded ecological dataset does not match its content hash");
    return eco_parse_csv(text);
  }();
  return data;
}

double eco_g(const Eigen::VectorXd& x, bool* clamped) {
  if (x.size() != 5) throw Error(ErrorKind::shape, "eco_g takes 5 inputs");
  const double s5 = std::sin(2.0 * std::numbers::pi * x(4));
  double bracket = 1.35 + std::exp(x(0)) * std::sin(13.0 * (x(0) - 0.6) * (x(0) - 0.6)) * std::exp(x(1)) * std::sin(7.0 * x(1)) +
                   (1.0 / 38.0) * (x(2) * std::sqrt(x(3)) * s5 * s5);
  if (clamped) *clamped = false;
  if (!(bracket > 0.0)) {
    bracket = 1e-12;
    if (clamped) *clamped = true;
  }
  return (19.0 / 700.0) * std::cbrt(bracket);
}

double eco_phi(const Eigen::VectorXd& gamma, const Eigen::VectorXd& c, bool* clamped) {
  if (gamma.size() != 5 || c.size() != 5) throw Error(ErrorKind::shape, "eco_phi takes 5-vectors");
  Eigen::VectorXd x(5);
  for (int k = 0; k < 5; ++k) {
    if (gamma(k) == 0.0 && c(k) > 0.0) throw Error(ErrorKind::domain, "eco_phi: zero gamma with positive exponent");
    x(k) = std::pow(gamma(k), -c(k));
  }
  return eco_g(x, clamped);
}

Eigen::VectorXd eco_phi_all(const Eigen::VectorXd& gamma, const EcoData& data, EcoCounters* counters) {
  const auto n = static_cast<Eigen::Index>(data.populations());
  Eigen::VectorXd phi(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    bool clamped = false;
    phi(j) = eco_phi(gamma, data.C.row(j).transpose(), &clamped);
    if (clamped && counters) ++counters->bracket_clamps;
  }
  return phi;
}

double eco_log_conditional_alpha(const Eigen::VectorXd& alpha, const Eigen::VectorXd& phi, const EcoData& data,
                                 EcoCounters* counters) {
  double lp = 0.0;
  for (Eigen::Index j = 0; j < phi.size(); ++j) {
    const double eta = alpha(0) + alpha(1) * phi(j);
    const double log_rate = eta + std::log(data.T(j));
    if (log_rate > 700.0) {
      if (counters) ++counters->rate_overflow;
      return -kInf;
    }
    lp += data.Y(j) * log_rate - std::exp(log_rate) - boost::math::lgamma(data.Y(j) + 1.0);
  }
  for (int i = 0; i < 2; ++i) lp += normal_log_pdf(alpha(i), 0.0, kAlphaPriorSd);
  return lp;
}

double eco_log_conditional_alpha_at(const Eigen::VectorXd& alpha, const Eigen::VectorXd& gamma, const EcoData& data,
                                    EcoCounters* counters) {
  return eco_log_conditional_alpha(alpha, eco_phi_all(gamma, data, counters), data, counters);
}

double eco_log_posterior_gamma(const Eigen::VectorXd& gamma, const EcoData& data, EcoCounters* counters) {
  if (gamma.size() != 5) throw Error(ErrorKind::shape, "eco gamma has 5 components");
  double lp = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double v = log_density(AuxDistribution{BetaDist{2.0, 2.0}}, gamma(k));
    if (!std::isfinite(v)) return -kInf;
    lp += v;
  }
  const Eigen::VectorXd phi = eco_phi_all(gamma, data, counters);
  for (Eigen::Index j = 0; j < phi.size(); ++j) {
    if (!(phi(j) > 0.0 && phi(j) < 1.0)) {
      if (counters) ++counters->invalid_phi;
      return -kInf;
    }
    lp += log_density(AuxDistribution{BinomialDist{static_cast<long long>(data.N(j)), phi(j)}}, data.Z(j));
  }
  return lp;
}

ChainStart eco_alpha_start(const Eigen::VectorXd& phi, const EcoData& data) {
  const double prior_prec = 1.0 / (kAlphaPriorSd * kAlphaPriorSd);
  Eigen::Vector2d a(std::log(data.Y.sum() / data.T.sum()), 0.0);
  Eigen::Matrix2d H;
  auto objective = [&](const Eigen::Vector2d& x) {
    return eco_log_conditional_alpha(x, phi, data);
  };
  for (int it = 0; it < 50; ++it) {
    Eigen::Vector2d g(-prior_prec * a(0), -prior_prec * a(1));
    H = -prior_prec * Eigen::Matrix2d::Identity();
    for (Eigen::Index j = 0; j < phi.size(); ++j) {
      const double mu = data.T(j) * std::exp(a(0) + a(1) * phi(j));
      const double r = data.Y(j) - mu;
      g(0) += r;
      g(1) += r * phi(j);
      H(0, 0) -= mu;
      H(0, 1) -= mu * phi(j);
      H(1, 1) -= mu * phi(j) * phi(j);
    }
    H(1, 0) = H(0, 1);
    Eigen::Vector2d step = -H.ldlt().solve(g);
    const double f0 = objective(a);
    double t = 1.0;
    while (t > 1e-8 && !(objective(a + t * step) >= f0)) t *= 0.5;
    a += t * step;
    if ((t * step).norm() < 1e-10 * (1.0 + a.norm())) break;
  }
  H = -prior_prec * Eigen::Matrix2d::Identity();
  for (Eigen::Index j = 0; j < phi.size(); ++j) {
    const double mu = data.T(j) * std::exp(a(0) + a(1) * phi(j));
    H(0, 0) -= mu;
    H(0, 1) -= mu * phi(j);
    H(1, 1) -= mu * phi(j) * phi(j);
  }
  H(1, 0) = H(0, 1);
  ChainStart s;
  s.init = a;
  const Eigen::Matrix2d cov = (-H).inverse();
  if (cov.allFinite() && cov(0, 0) > 0 && cov(1, 1) > 0) s.proposal_covariance = Eigen::MatrixXd(cov);
  s.step_scale = 0.1;
  return s;
}

Eigen::MatrixXd eco_gamma_pool(const EcoData& data, const EcoPoolConfig& cfg) {
  RngStream rng(cfg.seed, hash_label("eco-gamma-pool"));
  LogDensity target = [&data](const Eigen::VectorXd& g) { return eco_log_posterior_gamma(g, data); };
  Eigen::VectorXd best(5);
  double best_lp = -kInf;
  for (std::size_t i = 0; i < cfg.prior_probes; ++i) {
    Eigen::VectorXd g(5);
    for (int k = 0; k < 5; ++k) g(k) = rng.beta(2.0, 2.0);
    const double lp = target(g);
    if (lp > best_lp) {
      best_lp = lp;
      best = g;
    }
  }
  if (!std::isfinite(best_lp))
    throw Error(ErrorKind::initialization, "eco gamma pool: no prior draw has finite posterior density");
  McmcConfig mc;
  mc.n_samples = cfg.draws;
  mc.burn_in = cfg.burn_in;
  mc.initial_step_scale = 0.02;
  mc.seed = cfg.seed;
  mc.stream = hash_label("eco-gamma-chain");
  return adaptive_metropolis(target, best, mc).states;
}

ProblemSpec make_eco_problem(const EcoData& data, std::shared_ptr<const Eigen::MatrixXd> gamma_pool) {
  if (!gamma_pool || gamma_pool->rows() == 0)
    throw Error(ErrorKind::config, "the ecological problem needs a gamma posterior pool");
  ProblemSpec spec;
  spec.name = "ecological";
  spec.p = 2;
  spec.q = 5;
  auto shared_data = std::make_shared<const EcoData>(data);
  spec.prior.pool = gamma_pool;
  spec.prior.sampler = [gamma_pool](RngStream& rng) {
    return Eigen::VectorXd(gamma_pool->row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(gamma_pool->rows())))).transpose());
  };
  spec.prior.log_density = [shared_data](const Eigen::VectorXd& g) { return eco_log_posterior_gamma(g, *shared_data); };
  spec.conditional = [shared_data](const Eigen::VectorXd& gamma) {
    const Eigen::VectorXd phi = eco_phi_all(gamma, *shared_data);
    return LogDensity([shared_data, phi](const Eigen::VectorXd& a) {
      return eco_log_conditional_alpha(a, phi, *shared_data);
    });
  };
  spec.chain_start = [shared_data](const Eigen::VectorXd& gamma) {
    return eco_alpha_start(eco_phi_all(gamma, *shared_data), *shared_data);
  };
  spec.alpha_bounds = Bounds::unbounded(2);
  spec.gamma_bounds = Bounds::box(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5));
  spec.gamma_point = gamma_pool->colwise().mean().transpose();
  return spec;
}

}  // namespace cutpost
