#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cutpost/doe.hpp"
#include "cutpost/families.hpp"
#include "cutpost/rng.hpp"
#include "cutpost/sampler.hpp"

namespace cutpost {

// ---------------------------------------------------------------------------
// Generic problem description consumed by the cut engines.

/// Where a conditional chain should start, with an optional proposal
/// covariance hint.
struct ChainStart {
  Eigen::VectorXd init;
  std::optional<Eigen::MatrixXd> proposal_covariance;
  double step_scale = 0.1;
};

/// The distribution of the cut parameter gamma (its module posterior).
struct PriorSpec {
  PriorSampler sampler;
  LogDensity log_density;               // unnormalized
  std::vector<QuantileFn> quantiles;    // per margin; empty when not available
  std::shared_ptr<const Eigen::MatrixXd> pool;  // draws (e.g. MCMC) when available
};

struct ProblemSpec {
  std::string name;
  int p = 1;  // dimension of alpha
  int q = 1;  // dimension of gamma
  PriorSpec prior;
  /// Conditional log-density of alpha given gamma (and the data).
  std::function<LogDensity(const Eigen::VectorXd& gamma)> conditional;
  std::function<ChainStart(const Eigen::VectorXd& gamma)> chain_start;
  Bounds alpha_bounds;
  Bounds gamma_bounds;
  /// Point estimate of gamma used for the plug-in distribution.
  Eigen::VectorXd gamma_point;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Diamond-in-a-box: n1 weighings of the diamond, n2 of diamond plus box.

struct DbConfig {
  int n1 = 10;
  int n2 = 100;
  double sigma = 0.1;         // scale error sd
  double mu_alpha = 1.0;
  double sigma_alpha = 0.1;   // +infinity gives a flat prior
  double mu_gamma = 10.0;
  double sigma_gamma = 0.1;
  double true_alpha = 1.0;
  double true_gamma = 10.0;
  std::optional<double> sigma_star;        // generating noise sd
  std::optional<double> sigma_gamma_star;  // generating box-weight sd

  double alpha_precision() const;
  void validate() const;
};

struct DbData {
  double ybar1 = 0.0;
  double ybar2 = 0.0;
};

/// n1 + n2 observations. When sigma_star is set the noise uses it; when
/// sigma_gamma_star is set the box weight is drawn from N(mu_gamma, sigma_gamma_star^2)
/// instead of being true_gamma.
Eigen::VectorXd db_generate(const DbConfig& cfg, RngStream& rng);
DbData db_summarize(const DbConfig& cfg, const Eigen::VectorXd& y);

/// Full-Bayes marginal posterior of alpha (gamma integrated out jointly).
FamilyParams db_marginal_posterior(const DbConfig& cfg, double ybar1, double ybar2);
/// Cut distribution of alpha.
FamilyParams db_cut_analytic(const DbConfig& cfg, double ybar1, double ybar2);

struct DbConditionalConstants {
  double A;  // conditional variance
  double B;  // intercept of the conditional mean
  double C;  // slope of the conditional mean in gamma
};
DbConditionalConstants db_conditional_constants(const DbConfig& cfg, double sum_y);
/// Conditional posterior of alpha given gamma: Normal(B + C*gamma, A).
FamilyParams db_conditional(const DbConfig& cfg, double sum_y, double gamma);

/// Log of the conditional density of alpha, up to a constant, as a black box.
double db_log_conditional(const DbConfig& cfg, const DbData& data, double alpha, double gamma);

ProblemSpec make_db_problem(const DbConfig& cfg, const DbData& data);

// ---------------------------------------------------------------------------
// Ecological HPV / cervical cancer study with a nonlinear prevalence map.

struct EcoData {
  Eigen::VectorXd Y, Z, N, T;  // 13 populations
  Eigen::MatrixXd C;           // 13 x 5 constants
  std::size_t populations() const { return static_cast<std::size_t>(Y.size()); }
};

/// Counters for the clamp and invalid-probability events.
struct EcoCounters {
  std::atomic<std::uint64_t> bracket_clamps{0};
  std::atomic<std::uint64_t> invalid_phi{0};
  std::atomic<std::uint64_t> rate_overflow{0};
};

/// FNV-1a 64-bit hash of the dataset text.
std::uint64_t eco_content_hash(const std::string& text);
extern const std::uint64_t kEcoDataHash;

/// The dataset embedded at build time; its content hash is checked.
const EcoData& eco_data();
EcoData eco_parse_csv(const std::string& text);
EcoData eco_load_csv(const std::string& path);

/// Nonlinear prevalence map. A nonpositive bracket is clamped to 1e-12 and
/// reported through `clamped`.
double eco_g(const Eigen::VectorXd& x, bool* clamped = nullptr);
double eco_phi(const Eigen::VectorXd& gamma, const Eigen::VectorXd& c, bool* clamped = nullptr);
Eigen::VectorXd eco_phi_all(const Eigen::VectorXd& gamma, const EcoData& data, EcoCounters* counters = nullptr);

/// Poisson log-likelihood of the cancer counts plus N(0, 100^2) priors.
double eco_log_conditional_alpha(const Eigen::VectorXd& alpha, const Eigen::VectorXd& phi, const EcoData& data,
                                 EcoCounters* counters = nullptr);
double eco_log_conditional_alpha_at(const Eigen::VectorXd& alpha, const Eigen::VectorXd& gamma, const EcoData& data,
                                    EcoCounters* counters = nullptr);
/// Binomial log-likelihood of the HPV counts plus Beta(2,2) priors.
double eco_log_posterior_gamma(const Eigen::VectorXd& gamma, const EcoData& data, EcoCounters* counters = nullptr);

/// Posterior mode of alpha given phi by Newton iterations, and the inverse
/// negative Hessian there.
ChainStart eco_alpha_start(const Eigen::VectorXd& phi, const EcoData& data);

struct EcoPoolConfig {
  std::size_t draws = 20000;
  std::size_t burn_in = 5000;
  std::size_t prior_probes = 4000;  // prior draws searched for a starting point
  std::uint64_t seed = 1;
};
/// Adaptive Metropolis draws from the gamma posterior.
Eigen::MatrixXd eco_gamma_pool(const EcoData& data, const EcoPoolConfig& cfg);

ProblemSpec make_eco_problem(const EcoData& data, std::shared_ptr<const Eigen::MatrixXd> gamma_pool);

}  // namespace cutpost
