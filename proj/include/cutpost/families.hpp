#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <variant>

#include "cutpost/rng.hpp"

namespace cutpost {

enum class FamilyKind { normal, mvn, weibull };

/// Conditional family. A Normal behaves exactly like a one-dimensional MVN.
struct FamilyTag {
  FamilyKind kind = FamilyKind::normal;
  int dim = 1;  // p, the dimension of alpha

  static FamilyTag normal() { return {FamilyKind::normal, 1}; }
  static FamilyTag mvn(int p);
  static FamilyTag weibull() { return {FamilyKind::weibull, 1}; }

  /// Number of parameters r.
  std::size_t param_count() const;
  bool univariate() const { return dim == 1; }
  std::string name() const;
  /// Parses "normal", "weibull", "mvn<p>" or "mvn" (with p given separately).
  static FamilyTag parse(const std::string& text, int p = 1);

  bool operator==(const FamilyTag&) const = default;
};

/// Parameter vector of a family member.
///   Normal:  (mean, sd)
///   MVN:     (mean_1..mean_p, sd_1..sd_p, cov_12, cov_13, .., cov_{p-1,p})
///   Weibull: (scale, shape)
struct FamilyParams {
  FamilyTag tag;
  Eigen::VectorXd values;

  /// Throws argument/shape errors on invalid lengths or values.
  void validate() const;
};

FamilyParams make_normal(double mean, double sd);
FamilyParams make_weibull(double scale, double shape);
/// Builds MVN params from a mean and covariance (upper triangle is read).
FamilyParams make_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

/// Mean vector of a Normal/MVN member.
Eigen::VectorXd family_mean(const FamilyParams& params);
/// Assembled covariance of a Normal/MVN member. No PSD repair.
Eigen::MatrixXd family_covariance(const FamilyParams& params);
/// Index of cov_ij (i < j) inside an MVN value vector.
std::size_t mvn_offdiag_index(int p, int i, int j);

/// Moment estimates (Normal/MVN) or maximum likelihood (Weibull).
/// Rows of `samples` are draws.
FamilyParams estimate_params(const Eigen::MatrixXd& samples, FamilyTag tag);

/// n draws as an n x p matrix.
Eigen::MatrixXd sample_family(const FamilyParams& params, std::size_t n, RngStream& rng);

double quantile(const FamilyParams& params, double u);
double cdf(const FamilyParams& params, double x);

double log_density(const FamilyParams& params, const Eigen::VectorXd& x);
double log_density(const FamilyParams& params, double x);

// Auxiliary distributions used by the reference problems.
struct BetaDist {
  double a, b;
};
struct BinomialDist {
  long long trials;
  double prob;
};
struct PoissonDist {
  double rate;
};
using AuxDistribution = std::variant<BetaDist, BinomialDist, PoissonDist>;

/// Log density (Beta) or log mass (Binomial, Poisson). Outside the support
/// the result is -infinity.
double log_density(const AuxDistribution& dist, double x);

double normal_cdf(double x);
double normal_quantile(double u);
double normal_log_pdf(double x, double mean, double sd);

}  // namespace cutpost
