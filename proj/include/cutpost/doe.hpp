#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cutpost/rng.hpp"
#include "cutpost/sampler.hpp"

namespace cutpost {

enum class DesignMethod { iid, lhs, support, mined };

const char* to_string(DesignMethod method);
DesignMethod parse_design_method(const std::string& text);  // iid, lhs, sp|support, mined

/// Box bounds; infinite entries mean unbounded in that direction.
struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Bounds unbounded(int q);
  static Bounds box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);
  int dim() const { return static_cast<int>(lower.size()); }
  bool all_finite() const;
  bool contains(const Eigen::VectorXd& x) const;
  Eigen::VectorXd clip(const Eigen::VectorXd& x) const;
};

struct DesignMatrix {
  Eigen::MatrixXd points;       // L x q
  std::string provenance;       // iid, lhs, support, mined, inflated(<base>)
  std::string target;           // description of what the design represents
  std::vector<double> energy_trace;  // support points only
  int monotonicity_violations = 0;   // support points only

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
  /// One row per point, header of margin names, provenance in a comment line.
  void write_csv(std::ostream& os, const std::vector<std::string>& names = {}) const;
};

using PriorSampler = std::function<Eigen::VectorXd(RngStream&)>;
using QuantileFn = std::function<double(double)>;

DesignMatrix iid_design(const PriorSampler& sampler, std::size_t L, RngStream& rng);

struct LhsOptions {
  int restarts = 50;
  /// Pairwise swap proposals per restart, as a multiple of L.
  int swaps_per_point = 10;
};

/// Latin hypercube with random-restart maximin swap improvement; margins are
/// mapped through their quantile functions at the end.
DesignMatrix lhs_design(const std::vector<QuantileFn>& quantiles, std::size_t L, RngStream& rng,
                        const LhsOptions& options = {});

struct SupportOptions {
  int max_iterations = 500;
  double tolerance = 1e-8;     // relative energy change
  /// Replace each point by its nearest unused pool member at the end.
  bool project_to_pool = false;
  /// Work on margins scaled to unit sd (pools with q > 1); the energy trace
  /// is then on that scale.
  bool standardize = true;
};

/// Support points of an empirical pool (rows are draws) by the
/// majorization-minimization update.
DesignMatrix support_points(const Eigen::MatrixXd& pool, std::size_t L, RngStream& rng,
                            const SupportOptions& options = {});
/// Support points of a univariate distribution given by its quantile
/// function, represented through a quantile grid of `grid` points.
DesignMatrix support_points(const QuantileFn& quantile, std::size_t L, RngStream& rng,
                            const SupportOptions& options = {}, std::size_t grid = 4096);

/// Energy distance between a design and a pool (the quantity support points
/// minimize, without the constant pool-pool term).
double design_energy(const Eigen::MatrixXd& design, const Eigen::MatrixXd& pool);

struct MinedOptions {
  int sweeps = 2000;
  double initial_temperature = 1.0;
  double cooling = 0.99;
};

/// Minimum-energy design for an unnormalized log-density, by coordinate-wise
/// simulated annealing from `init`.
DesignMatrix mined_design(const LogDensity& log_density, std::size_t L, const DesignMatrix& init,
                          const Bounds& bounds, RngStream& rng, const MinedOptions& options = {});

/// Log of the minimum-energy criterion for the given points.
double mined_log_criterion(const LogDensity& log_density, const Eigen::MatrixXd& points);

enum class InflationMode { linear, power };

/// Linear: affine stretch about the column mean by (1 + omega).
/// Power: per-margin KDE raised to omega, resampled by a rank-preserving
/// inverse-CDF map on a 512-point grid.
DesignMatrix inflate_variance(const DesignMatrix& design, double omega, const Bounds& bounds, InflationMode mode);

}  // namespace cutpost
