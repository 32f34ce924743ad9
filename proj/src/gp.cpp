#include "cutpost/gp.hpp"

#include <cmath>
#include <cstring>
#include <json.hpp>
#include <limits>
#include <numbers>

#include "cutpost/error.hpp"
#include "cutpost/optimize.hpp"

namespace cutpost {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

std::uint64_t hash_bytes(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Marginal likelihood of the scaled targets under K = a*R + r*I, where a is
// the signal variance and r the nugget, both relative to var(y).
struct Likelihood {
  const std::vector<Eigen::MatrixXd>& sq_dist;  // per input dimension
  const Eigen::VectorXd& y;                     // centered and scaled to unit variance
  double log_ls_lo, log_ls_hi;
  double log_a_lo = std::log(1e-6), log_a_hi = std::log(1e12);
  bool estimate_noise = false;
  double nugget = 0.0;  // fixed nugget, or lower end of the log-nugget range
  double log_r_hi = 0.0;

  int q() const { return static_cast<int>(sq_dist.size()); }

  static double bounded(double t, double lo, double hi) { return lo + (hi - lo) * sigmoid(t); }
  static double unbounded(double v, double lo, double hi) {
    return logit(std::clamp((v - lo) / (hi - lo), 1e-9, 1.0 - 1e-9));
  }

  void unpack(const Eigen::VectorXd& t, Eigen::VectorXd& log_ls, double& a, double& r) const {
    log_ls.resize(q());
    for (int k = 0; k < q(); ++k) log_ls(k) = bounded(t(k), log_ls_lo, log_ls_hi);
    a = std::exp(bounded(t(q()), log_a_lo, log_a_hi));
    r = estimate_noise ? std::exp(bounded(t(q() + 1), std::log(nugget), log_r_hi)) : nugget;
  }

  Eigen::MatrixXd correlation(const Eigen::VectorXd& log_ls) const {
    const Eigen::Index n = y.size();
    Eigen::MatrixXd expo = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < q(); ++k) expo += sq_dist[k] * std::exp(-2.0 * log_ls(k));
    return (-0.5 * expo.array()).exp().matrix();
  }

  double operator()(const Eigen::VectorXd& t, Eigen::VectorXd& grad) const {
    const Eigen::Index n = y.size();
    Eigen::VectorXd log_ls;
    double a, r;
    unpack(t, log_ls, a, r);
    const Eigen::MatrixXd R0 = correlation(log_ls);
    Eigen::MatrixXd K = a * R0;
    K.diagonal().array() += r;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    grad.setZero(t.size());
    if (llt.info() != Eigen::Success) return kInf;
    const Eigen::VectorXd alpha = llt.solve(y);
    const Eigen::MatrixXd Lm = llt.matrixL();
    const double nll = Lm.diagonal().array().log().sum() + 0.5 * y.dot(alpha);
    if (!std::isfinite(nll)) return kInf;

    // d nll = 0.5 tr((K^-1 - alpha alpha^T) dK)
    Eigen::MatrixXd Linv = Eigen::MatrixXd::Identity(n, n);
    Lm.triangularView<Eigen::Lower>().solveInPlace(Linv);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
    W.selfadjointView<Eigen::Lower>().rankUpdate(Linv.transpose());
    W.triangularView<Eigen::StrictlyUpper>() = W.transpose();
    W.noalias() -= alpha * alpha.transpose();
    const Eigen::MatrixXd WR = W.cwiseProduct(R0);
    for (int k = 0; k < q(); ++k) {
      const double inv_l2 = std::exp(-2.0 * log_ls(k));
      const double d = 0.5 * a * inv_l2 * WR.cwiseProduct(sq_dist[k]).sum();
      const double s = sigmoid(t(k));
      grad(k) = d * (log_ls_hi - log_ls_lo) * s * (1.0 - s);
    }
    {
      const double d = 0.5 * a * WR.sum();
      const double s = sigmoid(t(q()));
      grad(q()) = d * (log_a_hi - log_a_lo) * s * (1.0 - s);
    }
    if (estimate_noise) {
      const double d = 0.5 * r * W.trace();
      const double s = sigmoid(t(q() + 1));
      grad(q() + 1) = d * (log_r_hi - std::log(nugget)) * s * (1.0 - s);
    }
    return nll;
  }
};

}  // namespace

GpModel GpModel::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpOptions& options) {
  const Eigen::Index n = X.rows();
  const Eigen::Index q = X.cols();
  if (n < 3) throw Error(ErrorKind::argument, "gp_fit needs at least 3 training points");
  if (y.size() != n) throw Error(ErrorKind::shape, "gp_fit: X and y row counts differ");
  if (q < 1) throw Error(ErrorKind::shape, "gp_fit: no input columns");
  if (!X.allFinite() || !y.allFinite()) throw Error(ErrorKind::argument, "gp_fit: non-finite training data");

  GpModel m;
  m.estimate_noise_ = options.estimate_noise;
  m.x_center_ = X.colwise().mean();
  m.x_scale_.resize(q);
  for (Eigen::Index k = 0; k < q; ++k) {
    const double sd = std::sqrt((X.col(k).array() - m.x_center_(k)).square().sum() / static_cast<double>(n - 1));
    m.x_scale_(k) = sd > 0.0 ? sd : 1.0;
  }
  m.Xs_ = (X.rowwise() - m.x_center_).array().rowwise() / m.x_scale_.array();
  m.x_lo_ = m.Xs_.colwise().minCoeff();
  m.x_hi_ = m.Xs_.colwise().maxCoeff();

  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = hash_bytes(h, X.data(), sizeof(double) * static_cast<std::size_t>(X.size()));
  m.design_hash_ = hash_bytes(h, y.data(), sizeof(double) * static_cast<std::size_t>(y.size()));

  std::vector<Eigen::MatrixXd> sq_dist(static_cast<std::size_t>(q), Eigen::MatrixXd(n, n));
  for (Eigen::Index k = 0; k < q; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = m.Xs_(i, k) - m.Xs_(j, k);
        sq_dist[static_cast<std::size_t>(k)](i, j) = d * d;
      }
  if (!options.estimate_noise) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < i; ++j) {
        double d2 = 0;
        for (Eigen::Index k = 0; k < q; ++k) d2 += sq_dist[static_cast<std::size_t>(k)](i, j);
        if (d2 < 1e-24)
          throw Error(ErrorKind::duplicate_design,
                      "duplicate training inputs at rows " + std::to_string(j) + " and " + std::to_string(i));
      }
  }

  m.y_mean_ = y.mean();
  const Eigen::VectorXd yc = y.array() - m.y_mean_;
  if (yc.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + std::abs(m.y_mean_))) {
    // Constant surface: zero signal variance, mean prediction everywhere.
    m.lengthscales_ = Eigen::VectorXd::Ones(q);
    m.signal_variance_ = 0.0;
    m.nugget_ = options.nugget;
    m.weights_ = VectorXld::Zero(n);
    m.log_likelihood_ = 0.0;
    return m;
  }
  const double var_y = yc.squaredNorm() / static_cast<double>(n - 1);
  const Eigen::VectorXd ys = yc / std::sqrt(var_y);

  const double log_lo = std::log(options.min_lengthscale);
  const double log_hi = std::log(options.max_lengthscale);
  const int n_theta = static_cast<int>(q) + 1 + (options.estimate_noise ? 1 : 0);

  BfgsOptions bopt;
  bopt.max_iterations = 100;
  bopt.gradient_tolerance = 1e-5;
  bopt.relative_f_tolerance = 1e-9;
  bopt.stop_on_stall = true;

  for (double g = options.nugget; g <= options.max_nugget * 1.0000001; g *= 10.0) {
    Likelihood lik{sq_dist, ys, log_lo, log_hi};
    lik.estimate_noise = options.estimate_noise;
    lik.nugget = g;
    Objective obj = [&lik](const Eigen::VectorXd& t, Eigen::VectorXd& grad) { return lik(t, grad); };

    BfgsResult best;
    best.value = kInf;
    for (int s = 0; s < std::max(1, options.restarts); ++s) {
      Eigen::VectorXd t0(n_theta);
      for (int k = 0; k < static_cast<int>(q); ++k) {
        // Deterministic spread of starting lengthscales over [0.05, 20].
        const double frac = std::fmod(0.5 + s * (0.6180339887498949 + 0.1 * k), 1.0);
        const double log_l = std::log(0.05) + frac * (std::log(20.0) - std::log(0.05));
        t0(k) = Likelihood::unbounded(log_l, log_lo, log_hi);
      }
      const double frac_a = std::fmod(0.2 + s * 0.7548776662466927, 1.0);
      t0(q) = Likelihood::unbounded(std::log(0.5) + frac_a * std::log(100.0), lik.log_a_lo, lik.log_a_hi);
      if (options.estimate_noise) {
        const double frac = std::fmod(0.3 + s * 0.381966, 1.0);
        t0(q + 1) = logit(std::clamp(0.1 + 0.6 * frac, 0.01, 0.99));
      }
      BfgsResult r = minimize_bfgs(obj, t0, bopt);
      if (std::isfinite(r.value) && r.value < best.value) best = r;
    }
    if (!std::isfinite(best.value)) continue;

    Eigen::VectorXd log_ls;
    double a, r;
    lik.unpack(best.x, log_ls, a, r);
    m.lengthscales_ = log_ls.array().exp();
    m.nugget_ = r / a;
    const Eigen::MatrixXd R0 = lik.correlation(log_ls);
    Eigen::MatrixXd R = R0;
    R.diagonal().array() += m.nugget_;
    m.chol_.compute(R);
    if (m.chol_.info() != Eigen::Success) continue;
    m.weights_ = m.chol_.solve(yc).cast<long double>();
    if (!options.estimate_noise) {
      // Mean weights toward the nugget-free interpolant: factor with the
      // smallest jitter extended precision allows, then refine the residual
      // against the kernel used for prediction.
      using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
      MatrixXld R0(n, n);
      for (Eigen::Index i = 0; i < n; ++i) R0.col(i) = m.kernel_column_ld(m.Xs_.row(i));
      const GpModel::VectorXld ycl = yc.cast<long double>();
      Eigen::LLT<MatrixXld> fine;
      for (long double jitter = 1e-16L; jitter <= m.nugget_ * 1.0000001L; jitter *= 10.0L) {
        MatrixXld Rj = R0;
        Rj.diagonal().array() += jitter;
        fine.compute(Rj);
        if (fine.info() == Eigen::Success) break;
      }
      if (fine.info() == Eigen::Success) {
        GpModel::VectorXld w = fine.solve(ycl);
        GpModel::VectorXld res = ycl - R0 * w;
        long double last = res.norm();
        for (int it = 0; it < 20 && last > 1e-18L * ycl.norm(); ++it) {
          const GpModel::VectorXld next_w = w + fine.solve(res);
          GpModel::VectorXld next = ycl - R0 * next_w;
          const long double norm = next.norm();
          if (!(norm < last)) break;
          w = next_w;
          res.swap(next);
          last = norm;
        }
        m.weights_ = w;
      }
    }
    m.signal_variance_ = a * var_y;
    m.log_likelihood_ = -best.value - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi * var_y);
    return m;
  }
  throw Error(ErrorKind::conditioning, "kernel matrix could not be factorized up to the maximum nugget");
}

Eigen::RowVectorXd GpModel::standardize(const Eigen::VectorXd& x) const {
  return (x.transpose() - x_center_).array() / x_scale_.array();
}

Eigen::VectorXd GpModel::kernel_column(const Eigen::RowVectorXd& xs) const {
  const Eigen::Index n = Xs_.rows();
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double e = 0;
    for (Eigen::Index d = 0; d < Xs_.cols(); ++d) {
      const double z = (xs(d) - Xs_(i, d)) / lengthscales_(d);
      e += z * z;
    }
    k(i) = std::exp(-0.5 * e);
  }
  return k;
}

GpModel::VectorXld GpModel::kernel_column_ld(const Eigen::RowVectorXd& xs) const {
  const Eigen::Index n = Xs_.rows();
  VectorXld k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    long double e = 0;
    for (Eigen::Index d = 0; d < Xs_.cols(); ++d) {
      const long double z = (static_cast<long double>(xs(d)) - Xs_(i, d)) / lengthscales_(d);
      e += z * z;
    }
    k(i) = std::exp(-0.5L * e);
  }
  return k;
}

double GpModel::mean_at(const Eigen::RowVectorXd& xs) const {
  if (signal_variance_ == 0.0) return y_mean_;
  return static_cast<double>(y_mean_ + kernel_column_ld(xs).dot(weights_));
}

double GpModel::predict_mean(const Eigen::VectorXd& x) const { return mean_at(standardize(x)); }

Eigen::VectorXd GpModel::predict_mean(const Eigen::MatrixXd& X_new) const {
  Eigen::VectorXd out(X_new.rows());
  for (Eigen::Index i = 0; i < X_new.rows(); ++i) out(i) = predict_mean(Eigen::VectorXd(X_new.row(i).transpose()));
  return out;
}

GpPrediction GpModel::predict(const Eigen::MatrixXd& X_new) const {
  if (X_new.cols() != Xs_.cols()) throw Error(ErrorKind::shape, "gp_predict: input dimension mismatch");
  const Eigen::Index n_new = X_new.rows();
  const Eigen::Index n = Xs_.rows();
  GpPrediction out;
  out.mean.resize(n_new);
  out.sd.resize(n_new);
  out.extrapolated.assign(static_cast<std::size_t>(n_new), false);

  constexpr Eigen::Index kBlock = 1024;
  for (Eigen::Index start = 0; start < n_new; start += kBlock) {
    const Eigen::Index len = std::min(kBlock, n_new - start);
    Eigen::MatrixXd K(n, len);
    for (Eigen::Index c = 0; c < len; ++c) {
      const Eigen::RowVectorXd xs = standardize(X_new.row(start + c).transpose());
      bool extrap = false;
      for (Eigen::Index d = 0; d < xs.size(); ++d)
        if (xs(d) < x_lo_(d) - 0.5 || xs(d) > x_hi_(d) + 0.5) extrap = true;
      out.extrapolated[static_cast<std::size_t>(start + c)] = extrap;
      K.col(c) = kernel_column(xs);
    }
    if (signal_variance_ == 0.0) {
      out.mean.segment(start, len).setConstant(y_mean_);
      out.sd.segment(start, len).setZero();
      continue;
    }
    for (Eigen::Index c = 0; c < len; ++c) out.mean(start + c) = mean_at(standardize(X_new.row(start + c).transpose()));
    const Eigen::MatrixXd V = chol_.matrixL().solve(K);
    Eigen::VectorXd reduction = V.colwise().squaredNorm().transpose();
    if (!estimate_noise_) {
      // Remove the part of the reduction the nugget adds back at the data.
      const Eigen::MatrixXd U = chol_.matrixU().solve(V);
      reduction += nugget_ * U.colwise().squaredNorm().transpose();
    }
    for (Eigen::Index c = 0; c < len; ++c)
      out.sd(start + c) = std::sqrt(signal_variance_ * std::max(0.0, 1.0 - reduction(c)));
  }
  return out;
}

Eigen::VectorXd GpModel::lengthscales() const {
  return lengthscales_.array() * x_scale_.transpose().array();
}

std::string GpModel::to_json() const {
  nlohmann::json j;
  j["kernel"] = "squared_exponential";
  j["training_size"] = Xs_.rows();
  j["input_dim"] = Xs_.cols();
  j["lengthscales"] = std::vector<double>(lengthscales_.data(), lengthscales_.data() + lengthscales_.size());
  const Eigen::VectorXd raw = lengthscales();
  j["lengthscales_original_units"] = std::vector<double>(raw.data(), raw.data() + raw.size());
  j["signal_variance"] = signal_variance_;
  j["nugget"] = nugget_;
  j["noise_estimated"] = estimate_noise_;
  j["target_mean"] = y_mean_;
  j["log_likelihood"] = log_likelihood_;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(design_hash_));
  j["design_hash"] = buf;
  return j.dump();
}

Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw Error(ErrorKind::shape, "nearest_psd needs a square matrix");
  if (!M.allFinite()) throw Error(ErrorKind::argument, "nearest_psd: non-finite entries");
  const Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  if (eig.eigenvalues().minCoeff() >= 0.0) return S;
  const Eigen::MatrixXd& V = eig.eigenvectors();
  Eigen::MatrixXd out = V * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * V.transpose();
  return 0.5 * (out + out.transpose());
}

bool is_psd(const Eigen::MatrixXd& M, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  return eig.eigenvalues().minCoeff() >= -tol * scale;
}

}  // namespace cutpost
