#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cutpost/problems.hpp"

namespace cutpost {

struct KsResult {
  double distance = 0.0;
  std::size_t n = 0;
  double location = 0.0;  // where the supremum is attained
};

/// One-sample Kolmogorov-Smirnov distance to a continuous CDF.
KsResult ks_to_cdf(std::vector<double> samples, const std::function<double(double)>& cdf);
/// Two-sample Kolmogorov-Smirnov distance.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Right-continuous empirical CDF.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> samples);
  double operator()(double x) const;
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

/// Gaussian kernel density estimate.
class Kde {
 public:
  /// Silverman's rule 0.9*min(sd, IQR/1.34)*n^(-1/5) unless `bandwidth` is given.
  explicit Kde(std::vector<double> samples, std::optional<double> bandwidth = std::nullopt);
  double operator()(double x) const;
  double bandwidth() const { return bandwidth_; }
  /// Density on an evenly spaced grid.
  std::vector<double> evaluate_grid(double lo, double hi, std::size_t points) const;

 private:
  std::vector<double> samples_;
  double bandwidth_;
};

double silverman_bandwidth(const std::vector<double>& samples);

enum class CoverageSweep { sigma_star, sigma_gamma_star };

struct CoverageRow {
  double setting = 0.0;
  std::string method;  // full, cut
  double coverage = 0.0;
  double mse = 0.0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

/// Misspecification study: data generated under the starred truth, inference
/// under the assumed model, equal-tailed 95% normal intervals.
std::vector<CoverageRow> coverage_study(const DbConfig& assumed, CoverageSweep sweep,
                                        const std::vector<double>& grid, std::size_t reps,
                                        std::uint64_t seed, std::size_t threads = 1);

/// Protocol defaults for the coverage study: n1=10, n2=90, alpha=0, sigma=1,
/// gamma prior N(0, 0.5^2) resampled per replicate, flat alpha prior.
DbConfig coverage_default_config();

}  // namespace cutpost
