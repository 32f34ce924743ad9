#pragma once

// Seed-pinned random acquisition instances with an independent Monte Carlo
// reference, shared by the unit and acceptance suites.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cutpost/families.hpp"
#include "cutpost/rng.hpp"
#include "cutpost/seqecp.hpp"

namespace battery {

struct Instance {
  cutpost::FamilyTag tag;
  Eigen::VectorXd mean, var;
  double u = 0.9;
};

inline double uniform(cutpost::RngStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

inline std::vector<Instance> make(cutpost::FamilyKind kind, int count = 20, std::uint64_t seed = 20240611) {
  cutpost::RngStream rng(seed, static_cast<std::uint64_t>(kind));
  std::vector<Instance> out;
  for (int n = 0; n < count; ++n) {
    Instance in;
    in.u = uniform(rng, 0.6, 0.99);
    switch (kind) {
      case cutpost::FamilyKind::normal: {
        in.tag = cutpost::FamilyTag::normal();
        const double s = uniform(rng, 0.5, 2.0);
        in.mean = Eigen::Vector2d(uniform(rng, -1, 1), s);
        in.var = Eigen::Vector2d(uniform(rng, 1e-3, 0.05), s * s * uniform(rng, 1e-3, 0.02));
        break;
      }
      case cutpost::FamilyKind::weibull: {
        in.tag = cutpost::FamilyTag::weibull();
        const double l = uniform(rng, 0.5, 3.0), k = uniform(rng, 1.0, 4.0);
        in.mean = Eigen::Vector2d(l, k);
        in.var = Eigen::Vector2d(l * l * uniform(rng, 1e-3, 0.02), k * k * uniform(rng, 1e-3, 0.02));
        break;
      }
      case cutpost::FamilyKind::mvn: {
        in.tag = cutpost::FamilyTag::mvn(2);
        const double s1 = uniform(rng, 0.5, 2.0), s2 = uniform(rng, 0.5, 2.0);
        const double rho = uniform(rng, -0.5, 0.5);
        in.mean.resize(5);
        in.var.resize(5);
        in.mean << uniform(rng, -1, 1), uniform(rng, -1, 1), s1, s2, rho * s1 * s2;
        in.var << uniform(rng, 1e-3, 0.05), uniform(rng, 1e-3, 0.05), s1 * s1 * uniform(rng, 1e-3, 0.02),
            s2 * s2 * uniform(rng, 1e-3, 0.02), s1 * s2 * uniform(rng, 1e-3, 0.02);
        break;
      }
    }
    out.push_back(in);
  }
  return out;
}

// Variance of the quantile (of t'alpha for MVN, t = ones) under independent
// normal perturbations of the parameters; invalid draws are skipped.
inline double mc_reference(const Instance& in, std::size_t draws, std::uint64_t seed) {
  cutpost::RngStream rng(seed, 99);
  const double z = cutpost::normal_quantile(in.u);
  const Eigen::Index r = in.mean.size();
  Eigen::VectorXd x(r);
  double sum = 0, sum2 = 0;
  std::size_t n = 0;
  while (n < draws) {
    for (Eigen::Index j = 0; j < r; ++j) x(j) = in.mean(j) + std::sqrt(in.var(j)) * rng.normal();
    double q;
    if (in.tag.kind == cutpost::FamilyKind::weibull) {
      if (x(0) <= 0 || x(1) <= 0) continue;
      q = x(0) * std::pow(-std::log(1 - in.u), 1 / x(1));
    } else if (in.tag.kind == cutpost::FamilyKind::normal) {
      if (x(1) <= 0) continue;
      q = x(0) + z * x(1);
    } else {
      if (x(2) <= 0 || x(3) <= 0 || x(4) * x(4) > x(2) * x(2) * x(3) * x(3)) continue;
      q = x(0) + x(1) + z * std::sqrt(x(2) * x(2) + x(3) * x(3) + 2 * x(4));
    }
    sum += q;
    sum2 += q * q;
    ++n;
  }
  const double m = sum / static_cast<double>(n);
  return (sum2 - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
}

inline double delta_value(const Instance& in, cutpost::DeltaForm form = cutpost::DeltaForm::second_order) {
  switch (in.tag.kind) {
    case cutpost::FamilyKind::normal:
      return cutpost::acquisition_normal(in.mean(0), in.var(0), in.mean(1), in.var(1), in.u);
    case cutpost::FamilyKind::weibull:
      return cutpost::acquisition_weibull(in.mean(0), in.var(0), in.mean(1), in.var(1), in.u);
    case cutpost::FamilyKind::mvn:
      return cutpost::acquisition_mvn(2, in.mean, in.var, {}, in.u, form);
  }
  return 0;
}

}  // namespace battery
