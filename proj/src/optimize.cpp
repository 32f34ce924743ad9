#include "cutpost/optimize.hpp"

#include <cmath>
#include <limits>

namespace cutpost {

BfgsResult minimize_bfgs(const Objective& objective, Eigen::VectorXd x0,
                         const BfgsOptions& options) {
  const Eigen::Index n = x0.size();
  BfgsResult result;
  Eigen::VectorXd g(n);
  double f = objective(x0, g);
  result.x = x0;
  result.value = f;
  if (!std::isfinite(f) || !g.allFinite()) return result;

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  // Scale the first step so it moves roughly one unit.
  const double gnorm0 = g.norm();
  if (gnorm0 > 0) H *= std::min(1.0, 1.0 / gnorm0);

  Eigen::VectorXd x = x0, x_new(n), g_new(n);
  for (int it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    Eigen::VectorXd dir = -H * g;
    double slope = g.dot(dir);
    if (slope >= 0) {
      // Lost descent; restart from steepest descent.
      H.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double f_old = f;
    x = x_new;
    f = f_new;
    g = g_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * y;
      H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) -
           rho * (Hy * s.transpose() + s * Hy.transpose());
    }
    if (std::abs(f_old - f) <= options.relative_f_tolerance * (1.0 + std::abs(f))) {
      result.converged = g.lpNorm<Eigen::Infinity>() < std::sqrt(options.gradient_tolerance);
      if (result.converged || options.stop_on_stall) break;
    }
  }
  result.x = x;
  result.value = f;
  if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) result.converged = true;
  return result;
}

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x) {
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = h0 * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd numeric_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x) {
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  const Eigen::Index n = x.size();
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) h(i) = h0 * std::max(1.0, std::abs(x(i)));
  Eigen::MatrixXd H(n, n);
  const double f0 = f(x);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    xp(i) = x(i) + h(i);
    const double fp = f(xp);
    xp(i) = x(i) - h(i);
    const double fm = f(xp);
    xp(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (h(i) * h(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      xp(i) = x(i) + h(i); xp(j) = x(j) + h(j);
      const double fpp = f(xp);
      xp(j) = x(j) - h(j);
      const double fpm = f(xp);
      xp(i) = x(i) - h(i);
      const double fmm = f(xp);
      xp(j) = x(j) + h(j);
      const double fmp = f(xp);
      xp(i) = x(i); xp(j) = x(j);
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
    }
  }
  return H;
}

}  // namespace cutpost
