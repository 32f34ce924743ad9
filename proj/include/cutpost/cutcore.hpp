#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cutpost/doe.hpp"
#include "cutpost/families.hpp"
#include "cutpost/gp.hpp"
#include "cutpost/problems.hpp"
#include "cutpost/rng.hpp"

namespace cutpost {

struct RawSamples {
  Eigen::MatrixXd draws;  // n x p
};

/// Equal-weight mixture of family members.
struct Mixture {
  FamilyTag tag;
  std::vector<FamilyParams> components;
};

class CutApproximation {
 public:
  CutApproximation() = default;
  explicit CutApproximation(RawSamples raw) : data_(std::move(raw)) {}
  explicit CutApproximation(Mixture mix);

  bool is_mixture() const { return std::holds_alternative<Mixture>(data_); }
  const RawSamples& raw() const { return std::get<RawSamples>(data_); }
  const Mixture& mixture() const { return std::get<Mixture>(data_); }
  int dim() const;
  /// Number of pooled draws or mixture components.
  std::size_t size() const;

  /// Raw samples: rows drawn with replacement. Mixture: components visited
  /// cyclically from a random offset, one draw from each visit.
  Eigen::MatrixXd sample(std::size_t n, RngStream& rng) const;

  /// Raw samples as CSV with header alpha1..alphap.
  void write_csv(std::ostream& os) const;
  /// Mixture as JSON: family tag and one parameter vector per component.
  std::string to_json() const;

 private:
  std::variant<RawSamples, Mixture> data_;
};

/// Equal-weight average of the component densities.
double mixture_density(const Mixture& mix, const Eigen::VectorXd& x);
/// CDF of one margin of a Normal, MVN or Weibull mixture.
double mixture_marginal_cdf(const Mixture& mix, int margin, double x);

// ---------------------------------------------------------------------------
// Designs over the gamma module.

/// Design of L gamma locations from the problem's prior. Support points use
/// the pool when present, otherwise the quantile function (q = 1); MinED
/// starts from an LHS (or iid) design.
DesignMatrix make_design(const ProblemSpec& problem, DesignMethod method, std::size_t L, RngStream& rng);

/// m post-burn-in adaptive Metropolis draws of alpha given gamma.
Eigen::MatrixXd conditional_draws(const ProblemSpec& problem, const Eigen::VectorXd& gamma, std::size_t m,
                                  const RngStream& rng);

// ---------------------------------------------------------------------------
// Direct sampling and Little's aggregation.

/// One chain of m draws at each of L design locations, pooled (L*m rows).
CutApproximation direct_sample(const ProblemSpec& problem, std::size_t L, std::size_t m, DesignMethod method,
                               const RngStream& rng, std::size_t threads = 1);
/// Same, at given gamma locations (one location gives the plug-in distribution).
CutApproximation direct_sample_at(const ProblemSpec& problem, const Eigen::MatrixXd& gammas, std::size_t m,
                                  const RngStream& rng, std::size_t threads = 1);

/// Single Normal/MVN fitted to pooled draws by moments.
CutApproximation little_aggregate(const CutApproximation& samples);

// ---------------------------------------------------------------------------
// Emulating the conditional posterior.

enum class Phase1Method { mcmc, laplace };

struct InflationSpec {
  double omega = 0.1;
  InflationMode mode = InflationMode::linear;
};

struct EcpConfig {
  std::optional<std::size_t> budget;        // L; default 2^q + 4q + 1
  std::size_t samples_per_location = 500;   // m
  std::size_t prediction_size = 10000;      // M
  FamilyTag family = FamilyTag::normal();
  DesignMethod design = DesignMethod::support;
  /// Prediction design: support (default) or iid.
  DesignMethod prediction_design = DesignMethod::support;
  /// Fixed prediction locations; overrides prediction_size and design.
  std::optional<Eigen::MatrixXd> prediction_points;
  std::optional<InflationSpec> inflate;
  std::optional<std::size_t> bootstrap;     // B
  Phase1Method phase1 = Phase1Method::mcmc;
  /// MCMC estimates carry Monte Carlo error: fit the surfaces with an
  /// estimated nugget. Off, or with Laplace fits, the surfaces interpolate.
  bool estimate_target_noise = true;
  GpOptions gp;
  std::size_t threads = 1;

  std::size_t resolved_budget(int q) const;
  void validate(const ProblemSpec& problem) const;
};

std::size_t default_budget(int q);

/// Family parameters mapped to emulation scale: log for sd/scale/shape,
/// raw for means and covariances.
Eigen::VectorXd to_surface_scale(const FamilyParams& params);
std::vector<std::string> surface_names(const FamilyTag& tag);

struct SurfaceMoments {
  Eigen::MatrixXd mean;  // n x r, natural parameter scale
  Eigen::MatrixXd var;
};

/// One GP per parameter surface.
class EmulatorBank {
 public:
  /// targets: one row per training input, columns on the emulation scale.
  static EmulatorBank fit(const FamilyTag& tag, const Eigen::MatrixXd& X, const Eigen::MatrixXd& targets,
                          const GpOptions& options, std::size_t threads = 1);

  /// Family members at each row of `gammas`. MVN covariances are repaired
  /// with nearest_psd when needed and counted in `repairs`.
  std::vector<FamilyParams> predict(const Eigen::MatrixXd& gammas, std::size_t* repairs = nullptr,
                                    std::size_t threads = 1) const;
  /// Predictive means and variances of each parameter on its natural scale
  /// (lognormal moments for log-emulated surfaces).
  SurfaceMoments predict_moments(const Eigen::MatrixXd& gammas) const;

  const FamilyTag& tag() const { return tag_; }
  const std::vector<GpModel>& surfaces() const { return surfaces_; }
  const std::vector<std::string>& names() const { return names_; }
  const Eigen::MatrixXd& inputs() const { return X_; }
  std::string to_json() const;

 private:
  FamilyTag tag_;
  Eigen::MatrixXd X_;
  std::vector<GpModel> surfaces_;
  std::vector<std::string> names_;
  std::vector<bool> log_scale_;
};

/// Bootstrap re-estimates: B resamples per location. Returns L*B rows of
/// inputs and emulation-scale targets. B = 1 returns the plain estimates.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> ecp_bootstrap_augment(const Eigen::MatrixXd& gammas,
                                                                  const std::vector<Eigen::MatrixXd>& samples,
                                                                  std::size_t B, const FamilyTag& tag,
                                                                  const RngStream& rng);

struct Phase1Result {
  DesignMatrix design;
  std::vector<FamilyParams> estimates;
  std::vector<Eigen::MatrixXd> samples;  // empty for the Laplace route
};

/// Conditional fits at each design row (MCMC + estimate, or Laplace).
Phase1Result ecp_phase1(const ProblemSpec& problem, const EcpConfig& cfg, const DesignMatrix& design,
                        const RngStream& rng);
/// Appends one location to a phase-1 result.
void ecp_phase1_extend(const ProblemSpec& problem, const EcpConfig& cfg, const Eigen::VectorXd& gamma,
                       const RngStream& rng, Phase1Result& result);
EmulatorBank ecp_fit_bank(const EcpConfig& cfg, const Phase1Result& phase1, const RngStream& rng);

struct EcpResult {
  CutApproximation approximation;
  EmulatorBank bank;
  DesignMatrix training_design;
  Eigen::MatrixXd prediction_points;
  std::size_t psd_repairs = 0;
  std::vector<std::string> warnings;
};

/// Prediction design of M points from the prior.
Eigen::MatrixXd ecp_prediction_points(const ProblemSpec& problem, const EcpConfig& cfg, const RngStream& rng);
EcpResult ecp_phase2(const ProblemSpec& problem, const EcpConfig& cfg, EmulatorBank bank, DesignMatrix design,
                     const RngStream& rng);

EcpResult ecp_sample(const ProblemSpec& problem, const EcpConfig& cfg, const RngStream& rng);

}  // namespace cutpost
