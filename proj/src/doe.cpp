#include "cutpost/doe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "cutpost/diagnostics.hpp"
#include "cutpost/error.hpp"

namespace cutpost {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_L(std::size_t L) {
  if (L == 0) throw Error(ErrorKind::argument, "design size L must be at least 1");
}

std::vector<std::size_t> shuffled(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

// Morris-Mitchell phi_p sum over pairs, p = 15 (a smooth maximin surrogate).
constexpr double kPhiPower = 15.0;

double pair_term(const Eigen::MatrixXd& U, Eigen::Index a, Eigen::Index b) {
  const double d = (U.row(a) - U.row(b)).norm();
  return d > 0.0 ? std::pow(d, -kPhiPower) : kInf;
}

double phi_row(const Eigen::MatrixXd& U, Eigen::Index a, Eigen::Index skip) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < U.rows(); ++j)
    if (j != a && j != skip) s += pair_term(U, a, j);
  return s;
}

double phi_total(const Eigen::MatrixXd& U) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < U.rows(); ++i)
    for (Eigen::Index j = i + 1; j < U.rows(); ++j) s += pair_term(U, i, j);
  return s;
}

}  // namespace

const char* to_string(DesignMethod method) {
  switch (method) {
    case DesignMethod::iid: return "iid";
    case DesignMethod::lhs: return "lhs";
    case DesignMethod::support: return "sp";
    case DesignMethod::mined: return "mined";
  }
  return "unknown";
}

DesignMethod parse_design_method(const std::string& text) {
  if (text == "iid") return DesignMethod::iid;
  if (text == "lhs") return DesignMethod::lhs;
  if (text == "sp" || text == "support") return DesignMethod::support;
  if (text == "mined") return DesignMethod::mined;
  throw Error(ErrorKind::config, "unknown design method '" + text + "'");
}

Bounds Bounds::unbounded(int q) {
  return {Eigen::VectorXd::Constant(q, -kInf), Eigen::VectorXd::Constant(q, kInf)};
}

Bounds Bounds::box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (lower.size() != upper.size()) throw Error(ErrorKind::shape, "bounds size mismatch");
  if ((lower.array() > upper.array()).any()) throw Error(ErrorKind::argument, "lower bound above upper bound");
  return {lower, upper};
}

bool Bounds::all_finite() const { return lower.allFinite() && upper.allFinite(); }

bool Bounds::contains(const Eigen::VectorXd& x) const {
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

Eigen::VectorXd Bounds::clip(const Eigen::VectorXd& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

void DesignMatrix::write_csv(std::ostream& os, const std::vector<std::string>& names) const {
  os << "# provenance: " << provenance << "\n";
  if (!target.empty()) os << "# target: " << target << "\n";
  for (Eigen::Index k = 0; k < points.cols(); ++k) {
    if (k) os << ',';
    if (static_cast<std::size_t>(k) < names.size()) os << names[static_cast<std::size_t>(k)];
    else os << "gamma" << (k + 1);
  }
  os << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index k = 0; k < points.cols(); ++k) {
      if (k) os << ',';
      std::snprintf(buf, sizeof buf, "%.17g", points(i, k));
      os << buf;
    }
    os << "\n";
  }
}

DesignMatrix iid_design(const PriorSampler& sampler, std::size_t L, RngStream& rng) {
  check_L(L);
  DesignMatrix out;
  out.provenance = "iid";
  for (std::size_t i = 0; i < L; ++i) {
    const Eigen::VectorXd x = sampler(rng);
    if (i == 0) out.points.resize(static_cast<Eigen::Index>(L), x.size());
    out.points.row(static_cast<Eigen::Index>(i)) = x.transpose();
  }
  return out;
}

DesignMatrix lhs_design(const std::vector<QuantileFn>& quantiles, std::size_t L, RngStream& rng,
                        const LhsOptions& options) {
  check_L(L);
  if (quantiles.empty()) throw Error(ErrorKind::argument, "lhs_design needs at least one margin");
  const auto q = static_cast<Eigen::Index>(quantiles.size());
  const auto n = static_cast<Eigen::Index>(L);

  Eigen::MatrixXd best;
  double best_phi = kInf;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Eigen::MatrixXd U(n, q);
    for (Eigen::Index k = 0; k < q; ++k) {
      const auto perm = shuffled(L, rng);
      for (Eigen::Index i = 0; i < n; ++i)
        U(i, k) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + rng.uniform()) / static_cast<double>(L);
    }
    double phi = n > 1 ? phi_total(U) : 0.0;
    if (n > 1) {
      const long swaps = static_cast<long>(options.swaps_per_point) * static_cast<long>(n);
      for (long s = 0; s < swaps; ++s) {
        const auto a = static_cast<Eigen::Index>(rng.below(L));
        auto b = static_cast<Eigen::Index>(rng.below(L - 1));
        if (b >= a) ++b;
        const auto k = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(q)));
        const double before = phi_row(U, a, b) + phi_row(U, b, a);
        std::swap(U(a, k), U(b, k));
        const double after = phi_row(U, a, b) + phi_row(U, b, a);
        const double candidate = phi - before + after;
        if (candidate < phi) phi = candidate;
        else std::swap(U(a, k), U(b, k));
      }
      phi = phi_total(U);  // drop accumulated rounding
    }
    if (phi < best_phi || best.size() == 0) {
      best_phi = phi;
      best = U;
    }
  }

  DesignMatrix out;
  out.provenance = "lhs";
  out.points.resize(n, q);
  for (Eigen::Index k = 0; k < q; ++k)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = quantiles[static_cast<std::size_t>(k)](best(i, k));
      if (!std::isfinite(v))
        throw Error(ErrorKind::mapping, "quantile function of margin " + std::to_string(k) + " returned a non-finite value");
      out.points(i, k) = v;
    }
  return out;
}

double design_energy(const Eigen::MatrixXd& design, const Eigen::MatrixXd& pool) {
  const Eigen::Index L = design.rows(), N = pool.rows();
  double cross = 0.0;
  for (Eigen::Index i = 0; i < L; ++i)
    for (Eigen::Index k = 0; k < N; ++k) cross += (design.row(i) - pool.row(k)).norm();
  double self = 0.0;
  for (Eigen::Index i = 0; i < L; ++i)
    for (Eigen::Index j = i + 1; j < L; ++j) self += 2.0 * (design.row(i) - design.row(j)).norm();
  const double Ld = static_cast<double>(L), Nd = static_cast<double>(N);
  return 2.0 * cross / (Nd * Ld) - self / (Ld * Ld);
}

namespace {

// `chosen` receives the pool rows picked by the projection step.
DesignMatrix support_points_raw(const Eigen::MatrixXd& pool, std::size_t L, RngStream& rng,
                                const SupportOptions& options, std::vector<Eigen::Index>* chosen = nullptr) {
  const Eigen::Index N = pool.rows(), q = pool.cols();
  DesignMatrix out;
  out.provenance = "support";
  const auto n = static_cast<Eigen::Index>(L);
  if (N == n) {
    out.points = pool;
    out.energy_trace.push_back(design_energy(pool, pool));
    return out;
  }
  const auto start = shuffled(static_cast<std::size_t>(N), rng);
  Eigen::MatrixXd X(n, q);
  for (Eigen::Index i = 0; i < n; ++i) X.row(i) = pool.row(static_cast<Eigen::Index>(start[static_cast<std::size_t>(i)]));

  const double ratio = static_cast<double>(N) / static_cast<double>(n);
  // Points closer than this are treated as coincident and skipped.
  const double scale = std::max(1.0, pool.cwiseAbs().maxCoeff());
  const double tiny = 1e-14 * scale;
  const Eigen::MatrixXd poolT = pool.transpose();

  // One pass computes the update and the energy of the current design.
  Eigen::MatrixXd X_new(n, q);
  Eigen::VectorXd xi(q), acc(q);
  auto step = [&](double& energy) {
    double cross = 0.0, self = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      xi = X.row(i).transpose();
      acc.setZero();
      double weight = 0.0;
      for (Eigen::Index k = 0; k < N; ++k) {
        const double d = (poolT.col(k) - xi).norm();
        cross += d;
        if (d <= tiny) continue;
        weight += 1.0 / d;
        acc += poolT.col(k) / d;
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const Eigen::VectorXd diff = xi - X.row(j).transpose();
        const double d = diff.norm();
        self += d;
        if (d <= tiny) continue;
        acc += ratio * diff / d;
      }
      if (weight > 0.0) X_new.row(i) = (acc / weight).transpose();
      else X_new.row(i) = xi.transpose();
    }
    const double Ld = static_cast<double>(n), Nd = static_cast<double>(N);
    energy = 2.0 * cross / (Nd * Ld) - self / (Ld * Ld);
  };

  double energy = 0.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    step(energy);
    if (!out.energy_trace.empty()) {
      const double prev = out.energy_trace.back();
      if (energy > prev + 1e-10 * std::max(1.0, std::abs(prev))) ++out.monotonicity_violations;
      out.energy_trace.push_back(energy);
      if (std::abs(prev - energy) <= options.tolerance * std::max(std::abs(prev), 1e-300)) break;
    } else {
      out.energy_trace.push_back(energy);
    }
    X.swap(X_new);
  }

  if (options.project_to_pool) {
    std::vector<bool> used(static_cast<std::size_t>(N), false);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = -1;
      double best_d = kInf;
      for (Eigen::Index k = 0; k < N; ++k) {
        if (used[static_cast<std::size_t>(k)]) continue;
        const double d = (pool.row(k) - X.row(i)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      used[static_cast<std::size_t>(best)] = true;
      X.row(i) = pool.row(best);
      if (chosen) chosen->push_back(best);
    }
    out.provenance = "support(projected)";
  }
  out.points = X;
  return out;
}

}  // namespace

DesignMatrix support_points(const Eigen::MatrixXd& pool, std::size_t L, RngStream& rng,
                            const SupportOptions& options) {
  check_L(L);
  const Eigen::Index N = pool.rows(), q = pool.cols();
  if (static_cast<std::size_t>(N) < L)
    throw Error(ErrorKind::argument, "support_points: pool has fewer rows than requested points");
  if (!options.standardize || q < 2) return support_points_raw(pool, L, rng, options);
  const Eigen::RowVectorXd center = pool.colwise().mean();
  Eigen::RowVectorXd sd = (pool.rowwise() - center).colwise().norm() / std::sqrt(static_cast<double>(N));
  for (Eigen::Index j = 0; j < q; ++j)
    if (!(sd(j) > 0.0)) sd(j) = 1.0;
  const Eigen::MatrixXd scaled = (pool.rowwise() - center).array().rowwise() / sd.array();
  std::vector<Eigen::Index> chosen;
  DesignMatrix out = support_points_raw(scaled, L, rng, options, &chosen);
  if (chosen.empty()) {
    out.points = (out.points.array().rowwise() * sd.array()).rowwise() + center.array();
  } else {
    for (std::size_t i = 0; i < chosen.size(); ++i) out.points.row(static_cast<Eigen::Index>(i)) = pool.row(chosen[i]);
  }
  return out;
}

DesignMatrix support_points(const QuantileFn& quantile, std::size_t L, RngStream& rng,
                            const SupportOptions& options, std::size_t grid) {
  check_L(L);
  grid = std::max(grid, L + 1);
  Eigen::MatrixXd pool(static_cast<Eigen::Index>(grid), 1);
  for (std::size_t k = 0; k < grid; ++k) {
    const double v = quantile((static_cast<double>(k) + 0.5) / static_cast<double>(grid));
    if (!std::isfinite(v)) throw Error(ErrorKind::mapping, "support_points: quantile returned a non-finite value");
    pool(static_cast<Eigen::Index>(k), 0) = v;
  }
  DesignMatrix out = support_points(pool, L, rng, options);
  out.target = "quantile grid of " + std::to_string(grid) + " points";
  return out;
}

double mined_log_criterion(const LogDensity& log_density, const Eigen::MatrixXd& points) {
  const Eigen::Index L = points.rows();
  const double qd = static_cast<double>(points.cols());
  const double k = 4.0 * qd;
  std::vector<double> log_charge(static_cast<std::size_t>(L));
  for (Eigen::Index i = 0; i < L; ++i)
    log_charge[static_cast<std::size_t>(i)] = -log_density(points.row(i).transpose()) / (2.0 * qd);
  if (L == 1) return log_charge[0];
  std::vector<double> terms;
  for (Eigen::Index i = 0; i < L; ++i)
    for (Eigen::Index j = i + 1; j < L; ++j) {
      const double d = (points.row(i) - points.row(j)).norm();
      terms.push_back(k * (log_charge[static_cast<std::size_t>(i)] + log_charge[static_cast<std::size_t>(j)] - std::log(d)));
    }
  const double mx = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

DesignMatrix mined_design(const LogDensity& log_density, std::size_t L, const DesignMatrix& init,
                          const Bounds& bounds, RngStream& rng, const MinedOptions& options) {
  check_L(L);
  if (static_cast<std::size_t>(init.size()) != L)
    throw Error(ErrorKind::shape, "mined_design: init must have L rows");
  const Eigen::Index n = init.size(), q = init.dim();
  if (bounds.dim() != q) throw Error(ErrorKind::shape, "mined_design: bounds dimension mismatch");
  Eigen::MatrixXd X(n, q);
  for (Eigen::Index i = 0; i < n; ++i) X.row(i) = bounds.clip(init.points.row(i).transpose()).transpose();

  const double qd = static_cast<double>(q);
  const double power = 4.0 * qd;
  Eigen::VectorXd log_charge(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lf = log_density(X.row(i).transpose());
    if (!std::isfinite(lf))
      throw Error(ErrorKind::initialization, "mined_design: log-density is not finite at initial point " + std::to_string(i));
    log_charge(i) = -lf / (2.0 * qd);
  }

  // Proposal scale per coordinate: from the bounds when finite, else from the spread of init.
  Eigen::VectorXd step0(q);
  for (Eigen::Index c = 0; c < q; ++c) {
    const double width = bounds.upper(c) - bounds.lower(c);
    double spread = 0.0;
    if (n > 1) {
      const double mean = X.col(c).mean();
      spread = std::sqrt((X.col(c).array() - mean).square().sum() / static_cast<double>(n - 1));
    }
    double s = std::isfinite(width) ? 0.25 * width : 0.5 * spread;
    if (!(s > 0.0)) s = 0.5 * std::max(1.0, std::abs(X.col(c).mean()));
    step0(c) = s;
  }

  // Log pair terms; term(i, i) unused.
  Eigen::MatrixXd term = Eigen::MatrixXd::Constant(n, n, -kInf);
  auto pair = [&](Eigen::Index j, const Eigen::RowVectorXd& xi, double lci) {
    const double d = (xi - X.row(j)).norm();
    return power * (lci + log_charge(j) - std::log(d));
  };
  auto full_log = [&]() {
    if (n == 1) return log_charge(0);
    double mx = -kInf;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) mx = std::max(mx, term(i, j));
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) s += std::exp(term(i, j) - mx);
    return mx + std::log(s);
  };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) term(i, j) = term(j, i) = pair(j, X.row(i), log_charge(i));

  double current = full_log();
  double T = options.initial_temperature;
  Eigen::VectorXd row_new(n);
  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    const Eigen::Index c = sweep % q;
    const double step = step0(c) * std::max(0.02, std::sqrt(T));
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::RowVectorXd xi = X.row(i);
      xi(c) = std::clamp(xi(c) + step * rng.normal(), bounds.lower(c), bounds.upper(c));
      const double lf = log_density(xi.transpose());
      const double u = rng.uniform_open();
      if (!std::isfinite(lf)) continue;
      const double lci = -lf / (2.0 * qd);
      double proposed;
      if (n == 1) {
        proposed = lci;
      } else {
        double mx_new = -kInf, mx_old = -kInf;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i) continue;
          row_new(j) = pair(j, xi, lci);
          mx_new = std::max(mx_new, row_new(j));
          mx_old = std::max(mx_old, term(i, j));
        }
        double s_new = 0.0, s_old = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i) continue;
          s_new += std::exp(row_new(j) - mx_new);
          s_old += std::exp(term(i, j) - mx_old);
        }
        const double log_row_new = mx_new + std::log(s_new);
        const double log_row_old = mx_old + std::log(s_old);
        // Sum over pairs not involving i; recomputed when cancellation bites.
        double log_rest;
        const double rest = -std::expm1(log_row_old - current);
        if (rest > 1e-6) {
          log_rest = current + std::log(rest);
        } else {
          double mx = -kInf;
          for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = a + 1; b < n; ++b)
              if (a != i && b != i) mx = std::max(mx, term(a, b));
          double s = 0.0;
          if (std::isfinite(mx))
            for (Eigen::Index a = 0; a < n; ++a)
              for (Eigen::Index b = a + 1; b < n; ++b)
                if (a != i && b != i) s += std::exp(term(a, b) - mx);
          log_rest = s > 0.0 ? mx + std::log(s) : -kInf;
        }
        const double top = std::max(log_rest, log_row_new);
        proposed = top + std::log(std::exp(log_rest - top) + std::exp(log_row_new - top));
      }
      if (!std::isfinite(proposed)) continue;
      const double delta = proposed - current;
      if (delta <= 0.0 || std::log(u) < -delta / T) {
        X.row(i) = xi;
        log_charge(i) = lci;
        for (Eigen::Index j = 0; j < n; ++j)
          if (j != i) term(i, j) = term(j, i) = row_new(j);
        current = proposed;
      }
    }
    T *= options.cooling;
    current = full_log();
  }

  DesignMatrix out;
  out.provenance = "mined";
  out.target = init.target;
  out.points = X;
  return out;
}

DesignMatrix inflate_variance(const DesignMatrix& design, double omega, const Bounds& bounds, InflationMode mode) {
  const Eigen::Index L = design.size(), q = design.dim();
  if (bounds.dim() != q) throw Error(ErrorKind::shape, "inflate_variance: bounds dimension mismatch");
  DesignMatrix out = design;
  out.provenance = "inflated(" + design.provenance + ")";
  out.energy_trace.clear();
  out.monotonicity_violations = 0;

  if (mode == InflationMode::linear) {
    if (!(omega > 0.0)) throw Error(ErrorKind::argument, "linear inflation needs omega > 0");
    for (Eigen::Index c = 0; c < q; ++c) {
      const double m = design.points.col(c).mean();
      out.points.col(c) = (m + (1.0 + omega) * (design.points.col(c).array() - m)).matrix();
      if (out.points.col(c).minCoeff() < bounds.lower(c) || out.points.col(c).maxCoeff() > bounds.upper(c))
        throw Error(ErrorKind::bounds_violation,
                    "linear inflation leaves the support in margin " + std::to_string(c) + "; use power mode");
    }
    return out;
  }

  if (!(omega > 0.0 && omega <= 1.0)) throw Error(ErrorKind::argument, "power inflation needs omega in (0,1]");
  if (L < 2) throw Error(ErrorKind::argument, "power inflation needs at least two points");
  constexpr std::size_t kGrid = 512;
  for (Eigen::Index c = 0; c < q; ++c) {
    std::vector<double> col(design.points.col(c).data(), design.points.col(c).data() + L);
    Kde kde(col);
    const double mn = *std::min_element(col.begin(), col.end());
    const double mx = *std::max_element(col.begin(), col.end());
    const double mean = design.points.col(c).mean();
    const double sd = std::sqrt((design.points.col(c).array() - mean).square().sum() / static_cast<double>(L - 1));
    const double pad = 4.0 * std::max(sd, kde.bandwidth()) / std::sqrt(omega);
    const double lo = std::max(bounds.lower(c), mn - pad);
    const double hi = std::min(bounds.upper(c), mx + pad);
    std::vector<double> dens = kde.evaluate_grid(lo, hi, kGrid);
    for (double& v : dens) v = std::pow(std::max(v, 0.0), omega);
    const double h = (hi - lo) / static_cast<double>(kGrid - 1);
    std::vector<double> cum(kGrid, 0.0);
    for (std::size_t g = 1; g < kGrid; ++g) cum[g] = cum[g - 1] + 0.5 * h * (dens[g] + dens[g - 1]);
    const double total = cum.back();
    if (!(total > 0.0)) throw Error(ErrorKind::numerical, "power inflation: flattened density has no mass");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(L));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return design.points(a, c) < design.points(b, c); });
    for (Eigen::Index r = 0; r < L; ++r) {
      const double target = total * (static_cast<double>(r) + 0.5) / static_cast<double>(L);
      const auto it = std::lower_bound(cum.begin(), cum.end(), target);
      std::size_t g = static_cast<std::size_t>(std::distance(cum.begin(), it));
      double v;
      if (g == 0) {
        v = lo;
      } else if (g >= kGrid) {
        v = hi;
      } else {
        const double frac = (target - cum[g - 1]) / std::max(cum[g] - cum[g - 1], 1e-300);
        v = lo + h * (static_cast<double>(g - 1) + frac);
      }
      out.points(order[static_cast<std::size_t>(r)], c) = std::clamp(v, bounds.lower(c), bounds.upper(c));
    }
  }
  return out;
}

}  // namespace cutpost
