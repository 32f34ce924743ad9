#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cutpost/families.hpp"

namespace cutpost {

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

struct McmcConfig {
  std::size_t n_samples = 1000;  // kept after burn-in
  /// Discarded iterations; default max(25% of n_samples, 200).
  std::optional<std::size_t> burn_in;
  /// First iteration using the adapted covariance; default max(100, 10*d).
  std::optional<std::size_t> adapt_start;
  double initial_step_scale = 0.1;
  /// Proposal covariance used before adaptation, scaled by 2.38^2/d.
  /// Without it the initial proposal is initial_step_scale^2 * I.
  std::optional<Eigen::MatrixXd> initial_covariance;
  double jitter = 1e-8;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::size_t resolved_burn_in() const;
  std::size_t resolved_adapt_start(int d) const;
};

struct Chain {
  Eigen::MatrixXd states;  // n_samples x d
  double acceptance_rate = 0.0;
  Eigen::VectorXd ess;     // per-dimension effective sample size
  bool stuck = false;      // no acceptance for 10*d consecutive windows
  std::vector<std::string> warnings;
};

/// Haario-style adaptive random-walk Metropolis.
Chain adaptive_metropolis(const LogDensity& log_density, const Eigen::VectorXd& init, const McmcConfig& cfg);

/// Effective sample size of one series (Geyer initial positive sequence).
double effective_sample_size(const Eigen::VectorXd& x);

struct LaplaceResult {
  FamilyParams params;     // Normal (d = 1) or MVN
  Eigen::VectorXd mode;
  Eigen::MatrixXd covariance;
  bool repaired = false;   // negative Hessian needed a PSD repair
  int converged_restarts = 0;
};

/// Gaussian approximation at the mode: quasi-Newton ascent from 10 jittered
/// starts around `init`, covariance from a central-difference Hessian.
LaplaceResult laplace_fit(const LogDensity& log_density, const Eigen::VectorXd& init, std::uint64_t seed = 0);

}  // namespace cutpost
