#include "cutpost/sampler.hpp"

#include <cmath>
#include <limits>

#include "cutpost/error.hpp"
#include "cutpost/gp.hpp"
#include "cutpost/optimize.hpp"
#include "cutpost/rng.hpp"

namespace cutpost {

std::size_t McmcConfig::resolved_burn_in() const {
  return burn_in ? *burn_in : std::max<std::size_t>(n_samples / 4, 200);
}

std::size_t McmcConfig::resolved_adapt_start(int d) const {
  return adapt_start ? *adapt_start : std::max<std::size_t>(100, 10 * static_cast<std::size_t>(d));
}

Chain adaptive_metropolis(const LogDensity& log_density, const Eigen::VectorXd& init, const McmcConfig& cfg) {
  const int d = static_cast<int>(init.size());
  if (d < 1) throw Error(ErrorKind::argument, "adaptive_metropolis: empty initial state");
  if (!(cfg.jitter > 0.0)) throw Error(ErrorKind::argument, "adaptive_metropolis: jitter must be positive");
  if (cfg.n_samples < 1) throw Error(ErrorKind::argument, "adaptive_metropolis: n_samples must be positive");
  const std::size_t burn = cfg.resolved_burn_in();
  const std::size_t adapt_start = cfg.resolved_adapt_start(d);
  const std::size_t total = burn + cfg.n_samples;
  const double scale = 2.38 * 2.38 / d;

  Eigen::VectorXd x = init;
  double lp = log_density(x);
  if (!std::isfinite(lp))
    throw Error(ErrorKind::initialization, "adaptive_metropolis: log-density is not finite at the initial state");

  RngStream rng(cfg.seed, cfg.stream);
  Eigen::MatrixXd prop_cov;
  if (cfg.initial_covariance) {
    if (cfg.initial_covariance->rows() != d || cfg.initial_covariance->cols() != d)
      throw Error(ErrorKind::shape, "adaptive_metropolis: initial covariance shape mismatch");
    prop_cov = scale * nearest_psd(*cfg.initial_covariance);
  } else {
    prop_cov = Eigen::MatrixXd::Identity(d, d) * cfg.initial_step_scale * cfg.initial_step_scale;
  }
  prop_cov.diagonal().array() += cfg.jitter;
  Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(prop_cov).matrixL();

  Eigen::VectorXd run_mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd run_m2 = Eigen::MatrixXd::Zero(d, d);
  std::size_t count = 0;

  Chain chain;
  chain.states.resize(static_cast<Eigen::Index>(cfg.n_samples), d);
  std::size_t accepted = 0;
  std::size_t window_accepts = 0, zero_windows = 0;
  constexpr std::size_t kWindow = 100;
  Eigen::VectorXd z(d), y(d);

  for (std::size_t it = 0; it < total; ++it) {
    if (it >= adapt_start && count >= 2) {
      Eigen::MatrixXd c = scale * run_m2 / static_cast<double>(count - 1);
      c.diagonal().array() += cfg.jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(c);
      if (llt.info() == Eigen::Success) chol = llt.matrixL();
    }
    for (int k = 0; k < d; ++k) z(k) = rng.normal();
    y = x + chol * z;
    const double lp_new = log_density(y);
    const double log_u = std::log(rng.uniform_open());
    if (std::isfinite(lp_new) && log_u < lp_new - lp) {
      x = y;
      lp = lp_new;
      ++window_accepts;
      if (it >= burn) ++accepted;
    }
    // Welford update of the history covariance.
    ++count;
    const Eigen::VectorXd delta = x - run_mean;
    run_mean += delta / static_cast<double>(count);
    run_m2 += delta * (x - run_mean).transpose();

    if ((it + 1) % kWindow == 0) {
      zero_windows = window_accepts == 0 ? zero_windows + 1 : 0;
      window_accepts = 0;
      if (zero_windows >= 10 * static_cast<std::size_t>(d) && !chain.stuck) {
        chain.stuck = true;
        chain.warnings.push_back("stuck chain: no acceptance for " + std::to_string(zero_windows) +
                                 " consecutive windows");
      }
    }
    if (it >= burn) chain.states.row(static_cast<Eigen::Index>(it - burn)) = x.transpose();
  }
  chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.n_samples);
  chain.ess.resize(d);
  for (int k = 0; k < d; ++k) chain.ess(k) = effective_sample_size(chain.states.col(k));
  return chain;
}

double effective_sample_size(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  if (n < 4) return static_cast<double>(n);
  const Eigen::VectorXd c = x.array() - x.mean();
  const double c0 = c.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  auto autocov = [&](Eigen::Index lag) {
    return c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n);
  };
  // Sum of consecutive autocorrelation pairs while they stay positive.
  double sum = 0.0;
  for (Eigen::Index k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    sum += pair;
  }
  const double tau = std::max(1.0, 2.0 * sum - 1.0);
  return static_cast<double>(n) / tau;
}

LaplaceResult laplace_fit(const LogDensity& log_density, const Eigen::VectorXd& init, std::uint64_t seed) {
  const Eigen::Index d = init.size();
  if (d < 1) throw Error(ErrorKind::argument, "laplace_fit: empty initial point");
  auto neg = [&](const Eigen::VectorXd& x) {
    const double v = log_density(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };
  Objective obj = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double f = neg(x);
    if (!std::isfinite(f)) {
      g.setZero(x.size());
      return f;
    }
    g = numeric_gradient(neg, x);
    return f;
  };

  RngStream rng(seed, 0x1a91ace);
  BfgsOptions opt;
  opt.max_iterations = 500;
  opt.gradient_tolerance = 1e-6;
  opt.relative_f_tolerance = 1e-14;

  BfgsResult best;
  best.value = std::numeric_limits<double>::infinity();
  int converged = 0;
  for (int r = 0; r < 10; ++r) {
    Eigen::VectorXd x0 = init;
    if (r > 0)
      for (Eigen::Index k = 0; k < d; ++k) x0(k) += 0.05 * std::max(1.0, std::abs(init(k))) * rng.normal();
    if (!std::isfinite(neg(x0))) continue;
    BfgsResult res = minimize_bfgs(obj, x0, opt);
    if (!std::isfinite(res.value)) continue;
    // Newton polish with the finite-difference Hessian.
    for (int it = 0; it < 5; ++it) {
      const Eigen::MatrixXd H = numeric_hessian(neg, res.x);
      const Eigen::VectorXd g = numeric_gradient(neg, res.x);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
      const Eigen::VectorXd step = ldlt.solve(g);
      const Eigen::VectorXd xn = res.x - step;
      const double fn = neg(xn);
      if (!(fn <= res.value)) break;
      const bool tiny = step.norm() <= 1e-12 * (1.0 + res.x.norm());
      res.x = xn;
      res.value = fn;
      res.converged = true;
      if (tiny) break;
    }
    if (res.converged) ++converged;
    if (res.converged && (res.value < best.value || !best.converged)) best = res;
    else if (!best.converged && res.value < best.value) best = res;
  }
  if (converged == 0) {
    std::vector<double> last(best.x.data(), best.x.data() + best.x.size());
    throw ConvergenceError("laplace_fit: mode search did not converge from any restart", last);
  }

  Eigen::MatrixXd H = numeric_hessian(neg, best.x);
  H = 0.5 * (H + H.transpose());
  LaplaceResult out;
  out.mode = best.x;
  out.converged_restarts = converged;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    H = nearest_psd(H);
    out.repaired = true;
    eig.compute(H);
  }
  if (!(eig.eigenvalues().minCoeff() > 1e-12 * std::max(top, 1e-300)))
    throw Error(ErrorKind::singular, "laplace_fit: Hessian at the mode is singular");
  const Eigen::MatrixXd& V = eig.eigenvectors();
  out.covariance = V * eig.eigenvalues().cwiseInverse().asDiagonal() * V.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  out.params = make_mvn(out.mode, out.covariance);
  return out;
}

}  // namespace cutpost
