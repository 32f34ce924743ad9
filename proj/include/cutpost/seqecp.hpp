#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "cutpost/cutcore.hpp"
#include "cutpost/families.hpp"
#include "cutpost/rng.hpp"

namespace cutpost {

// Acquisition functions: the predictive variance of the u-quantile of the
// conditional posterior at a candidate gamma, given the emulators' predictive
// means ("hat") and variances ("var") of each family parameter.

/// Var(mu) + z_u^2 Var(sigma).
double acquisition_normal(double mu_hat, double mu_var, double sigma_hat, double sigma_var, double u);

/// Second-order Delta approximation for the Weibull quantile. Takes the
/// standard shape (as in FamilyParams) and works internally with its inverse.
double acquisition_weibull(double lambda_hat, double lambda_var, double kappa_hat, double kappa_var, double u);

/// u-quantile of sum_i t_i alpha_i under a Normal/MVN member. A covariance
/// that is not PSD is repaired first.
double linear_combination_quantile(const FamilyParams& params, const Eigen::VectorXd& t, double u);

/// How E(sqrt(delta2)) is approximated in the MVN acquisition.
///   printed:      sqrt(E d2) - 0.5 (1/(16 E d2))^{3/2} V'
///   second_order: sqrt(E d2) - Var(d2) / (8 E d2^{3/2})
enum class DeltaForm { printed, second_order };

/// MVN acquisition for the linear combination t. `mean`/`var` follow the MVN
/// parameter layout (means, sds, covariances). Throws a domain error when
/// the combined variance estimate is not positive.
double acquisition_mvn(int p, const Eigen::VectorXd& mean, const Eigen::VectorXd& var, const Eigen::VectorXd& t,
                       double u, DeltaForm form = DeltaForm::second_order);

struct McAcquisition {
  double value = 0.0;
  std::size_t draws = 0;
  std::size_t rejections = 0;
  /// More than half of the parameter draws were invalid.
  bool ill_posed = false;
};

/// Sample variance of the u-quantile over n_mc parameter draws from
/// independent normal predictive marginals. Invalid draws are redrawn.
McAcquisition acquisition_mc(const FamilyTag& tag, const Eigen::VectorXd& mean, const Eigen::VectorXd& var, double u,
                             std::size_t n_mc, RngStream& rng, const Eigen::VectorXd& t = {});

struct SeqEcpConfig {
  EcpConfig ecp;                   // ecp.budget is the final L
  std::size_t build_budget = 0;    // L0; 0 picks max(3, L/2)
  std::size_t candidates = 500;    // fresh prior draws per round
  double u = 0.9;
  Eigen::VectorXd t;               // MVN combination; empty means all ones
  DeltaForm delta = DeltaForm::second_order;
  /// Score every candidate by Monte Carlo instead of the closed forms.
  bool monte_carlo = false;
  std::size_t mc_draws = 10000;

  std::size_t resolved_build(std::size_t L) const;
  void validate(const ProblemSpec& problem) const;
};

struct SeqRound {
  std::size_t round = 0;
  Eigen::VectorXd gamma;
  double score = 0.0;
  std::size_t rejections = 0;
  bool fallback = false;  // all scores zero: chosen by energy distance
};

struct SeqEcpResult {
  EcpResult ecp;
  std::vector<SeqRound> trace;

  /// Columns: round, gamma1..gammaq, score, rejections, fallback.
  void write_trace_csv(std::ostream& os) const;
};

/// Acquisition of each row of `candidates` under the current bank.
std::vector<McAcquisition> score_candidates(const EmulatorBank& bank, const Eigen::MatrixXd& candidates,
                                            const SeqEcpConfig& cfg, const RngStream& rng);

/// Build phase with L0 locations, then L - L0 rounds each adding the
/// highest-scoring candidate, then the usual prediction phase.
SeqEcpResult sequential_ecp(const ProblemSpec& problem, const SeqEcpConfig& cfg, const RngStream& rng);

}  // namespace cutpost
