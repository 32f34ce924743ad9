#include "cutpost/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cutpost/error.hpp"
#include "cutpost/parallel.hpp"

namespace cutpost {

namespace {

void require_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) throw Error(ErrorKind::argument, "KS: non-finite sample");
}

// Type-7 sample quantile of sorted data.
double sorted_quantile(const std::vector<double>& s, double p) {
  const double h = (static_cast<double>(s.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace

KsResult ks_to_cdf(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw Error(ErrorKind::argument, "ks_to_cdf needs at least one sample");
  require_finite(samples);
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  KsResult r;
  r.n = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    const double d = std::max(static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n);
    if (d > r.distance) {
      r.distance = d;
      r.location = samples[i];
    }
  }
  r.distance = std::clamp(r.distance, 0.0, 1.0);
  return r;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::argument, "ks_two_sample needs non-empty samples");
  require_finite(a);
  require_finite(b);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  KsResult r;
  r.n = a.size() + b.size();
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) v = a[i];
    else v = b[j];
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    const double d = std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb);
    if (d > r.distance) {
      r.distance = d;
      r.location = v;
    }
  }
  return r;
}

Ecdf::Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
  if (sorted_.empty()) throw Error(ErrorKind::argument, "ecdf needs at least one sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(std::distance(sorted_.begin(), it)) / static_cast<double>(sorted_.size());
}

double silverman_bandwidth(const std::vector<double>& samples) {
  if (samples.size() < 2) throw Error(ErrorKind::argument, "kde needs at least two samples");
  std::vector<double> s = samples;
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double mean = 0.0;
  for (double x : s) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : s) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double iqr = sorted_quantile(s, 0.75) - sorted_quantile(s, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) throw Error(ErrorKind::degenerate_sample, "kde: samples have zero spread");
  return 0.9 * spread * std::pow(n, -0.2);
}

Kde::Kde(std::vector<double> samples, std::optional<double> bandwidth) : samples_(std::move(samples)) {
  if (samples_.size() < 2) throw Error(ErrorKind::argument, "kde needs at least two samples");
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw Error(ErrorKind::argument, "kde bandwidth must be positive");
    bandwidth_ = *bandwidth;
  } else {
    bandwidth_ = silverman_bandwidth(samples_);
  }
  std::sort(samples_.begin(), samples_.end());
}

double Kde::operator()(double x) const {
  // Kernel mass beyond 9 bandwidths is below 1e-17 of the peak.
  const double reach = 9.0 * bandwidth_;
  const auto lo = std::lower_bound(samples_.begin(), samples_.end(), x - reach);
  const auto hi = std::upper_bound(samples_.begin(), samples_.end(), x + reach);
  double s = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double z = (x - *it) / bandwidth_;
    s += std::exp(-0.5 * z * z);
  }
  return s / (static_cast<double>(samples_.size()) * bandwidth_ * std::sqrt(2.0 * std::numbers::pi));
}

std::vector<double> Kde::evaluate_grid(double lo, double hi, std::size_t points) const {
  std::vector<double> out(points);
  if (points == 1) {
    out[0] = (*this)(lo);
    return out;
  }
  const double h = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t g = 0; g < points; ++g) out[g] = (*this)(lo + h * static_cast<double>(g));
  return out;
}

DbConfig coverage_default_config() {
  DbConfig cfg;
  cfg.n1 = 10;
  cfg.n2 = 90;
  cfg.sigma = 1.0;
  cfg.mu_alpha = 0.0;
  cfg.sigma_alpha = std::numeric_limits<double>::infinity();
  cfg.mu_gamma = 0.0;
  cfg.sigma_gamma = 0.5;
  cfg.true_alpha = 0.0;
  cfg.true_gamma = 0.0;
  return cfg;
}

std::vector<CoverageRow> coverage_study(const DbConfig& assumed, CoverageSweep sweep, const std::vector<double>& grid,
                                        std::size_t reps, std::uint64_t seed, std::size_t threads) {
  if (reps < 100) throw Error(ErrorKind::argument, "coverage_study needs at least 100 replicates");
  assumed.validate();
  const double z = normal_quantile(0.975);
  std::vector<CoverageRow> rows;
  const RngStream master(seed, hash_label("coverage"));
  for (std::size_t s = 0; s < grid.size(); ++s) {
    DbConfig gen = assumed;
    if (sweep == CoverageSweep::sigma_star) {
      gen.sigma_star = grid[s] * assumed.sigma;
      gen.sigma_gamma_star = assumed.sigma_gamma;
    } else {
      gen.sigma_gamma_star = grid[s] * assumed.sigma_gamma;
    }
    std::vector<unsigned char> cover_full(reps), cover_cut(reps);
    std::vector<double> se_full(reps), se_cut(reps);
    const RngStream cell = master.derive(static_cast<std::uint64_t>(s));
    parallel_for(reps, threads, [&](std::size_t r) {
      RngStream rng = cell.derive(static_cast<std::uint64_t>(r));
      const Eigen::VectorXd y = db_generate(gen, rng);
      const DbData d = db_summarize(gen, y);
      const FamilyParams full = db_marginal_posterior(assumed, d.ybar1, d.ybar2);
      const FamilyParams cut = db_cut_analytic(assumed, d.ybar1, d.ybar2);
      const double truth = assumed.true_alpha;
      cover_full[r] = std::abs(full.values(0) - truth) <= z * full.values(1);
      cover_cut[r] = std::abs(cut.values(0) - truth) <= z * cut.values(1);
      se_full[r] = (full.values(0) - truth) * (full.values(0) - truth);
      se_cut[r] = (cut.values(0) - truth) * (cut.values(0) - truth);
    });
    auto summarize = [&](const char* method, const std::vector<unsigned char>& cov, const std::vector<double>& se) {
      double c = 0.0, m = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        c += cov[r];
        m += se[r];
      }
      rows.push_back({grid[s], method, c / static_cast<double>(reps), m / static_cast<double>(reps), reps, seed});
    };
    summarize("full", cover_full, se_full);
    summarize("cut", cover_cut, se_cut);
  }
  return rows;
}

}  // namespace cutpost
