#include "cutpost/families.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "cutpost/error.hpp"

namespace cutpost {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double lgamma_safe(double x) { return boost::math::lgamma(x); }

void check_u(double u) {
  if (!(u > 0.0 && u < 1.0)) throw Error(ErrorKind::domain, "quantile level must lie in (0,1)");
}

// Weibull shape by Newton on the profile score. Data are rescaled by their
// geometric mean; the score is scale invariant.
double weibull_shape_mle(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd lx = x.array().log();
  const double mean_log = lx.mean();
  lx.array() -= mean_log;
  const double sd_log = std::sqrt(lx.squaredNorm() / static_cast<double>(n - 1));
  if (!(sd_log > 0.0)) throw Error(ErrorKind::degenerate_sample, "Weibull fit: all samples equal");

  auto score = [&](double k, double& deriv) {
    double s0 = 0, s1 = 0, s2 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = std::exp(k * lx(i));
      s0 += w;
      s1 += w * lx(i);
      s2 += w * lx(i) * lx(i);
    }
    const double m1 = s1 / s0;
    deriv = s2 / s0 - m1 * m1 + 1.0 / (k * k);
    return m1 - 1.0 / k;  // mean of centered logs is zero
  };

  double k = std::numbers::pi / (std::sqrt(6.0) * sd_log);
  for (int it = 0; it < 200; ++it) {
    double d = 0;
    const double h = score(k, d);
    double step = h / d;
    double k_new = k - step;
    while (!(k_new > 0.0)) {
      step *= 0.5;
      k_new = k - step;
    }
    if (std::abs(k_new - k) <= 1e-10 * k) return k_new;
    k = k_new;
  }
  throw ConvergenceError("Weibull shape MLE did not converge in 200 iterations", {k});
}

}  // namespace

FamilyTag FamilyTag::mvn(int p) {
  if (p < 1) throw Error(ErrorKind::argument, "MVN dimension must be >= 1");
  return {FamilyKind::mvn, p};
}

std::size_t FamilyTag::param_count() const {
  if (kind == FamilyKind::weibull) return 2;
  const auto p = static_cast<std::size_t>(dim);
  return 2 * p + p * (p - 1) / 2;
}

std::string FamilyTag::name() const {
  switch (kind) {
    case FamilyKind::normal: return "normal";
    case FamilyKind::weibull: return "weibull";
    case FamilyKind::mvn: return "mvn" + std::to_string(dim);
  }
  return "unknown";
}

FamilyTag FamilyTag::parse(const std::string& text, int p) {
  if (text == "normal") return normal();
  if (text == "weibull") return weibull();
  if (text == "mvn") return mvn(p);
  if (text.rfind("mvn", 0) == 0) {
    try {
      return mvn(std::stoi(text.substr(3)));
    } catch (const std::logic_error&) {
    }
  }
  throw Error(ErrorKind::unsupported_tag, "unknown family '" + text + "'");
}

void FamilyParams::validate() const {
  if (static_cast<std::size_t>(values.size()) != tag.param_count())
    throw Error(ErrorKind::shape, "parameter vector length does not match family " + tag.name());
  if (!values.allFinite()) throw Error(ErrorKind::argument, "non-finite family parameter");
  switch (tag.kind) {
    case FamilyKind::weibull:
      if (!(values(0) > 0 && values(1) > 0))
        throw Error(ErrorKind::argument, "Weibull scale and shape must be positive");
      break;
    case FamilyKind::normal:
    case FamilyKind::mvn:
      for (int i = 0; i < tag.dim; ++i)
        if (values(tag.dim + i) < 0) throw Error(ErrorKind::argument, "negative standard deviation");
      break;
  }
}

FamilyParams make_normal(double mean, double sd) {
  FamilyParams p{FamilyTag::normal(), Eigen::Vector2d(mean, sd)};
  p.validate();
  return p;
}

FamilyParams make_weibull(double scale, double shape) {
  FamilyParams p{FamilyTag::weibull(), Eigen::Vector2d(scale, shape)};
  p.validate();
  return p;
}

std::size_t mvn_offdiag_index(int p, int i, int j) {
  if (i > j) std::swap(i, j);
  // pairs are ordered (0,1),(0,2),..,(0,p-1),(1,2),..
  std::size_t k = 0;
  for (int a = 0; a < i; ++a) k += static_cast<std::size_t>(p - 1 - a);
  return 2 * static_cast<std::size_t>(p) + k + static_cast<std::size_t>(j - i - 1);
}

FamilyParams make_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const int p = static_cast<int>(mean.size());
  if (cov.rows() != p || cov.cols() != p) throw Error(ErrorKind::shape, "covariance shape mismatch");
  FamilyParams out;
  out.tag = p == 1 ? FamilyTag::normal() : FamilyTag::mvn(p);
  out.values.resize(static_cast<Eigen::Index>(out.tag.param_count()));
  for (int i = 0; i < p; ++i) {
    out.values(i) = mean(i);
    out.values(p + i) = std::sqrt(std::max(0.0, cov(i, i)));
    for (int j = i + 1; j < p; ++j)
      out.values(static_cast<Eigen::Index>(mvn_offdiag_index(p, i, j))) = cov(i, j);
  }
  out.validate();
  return out;
}

Eigen::VectorXd family_mean(const FamilyParams& params) {
  if (params.tag.kind == FamilyKind::weibull)
    throw Error(ErrorKind::unsupported_tag, "family_mean needs a Normal/MVN member");
  return params.values.head(params.tag.dim);
}

Eigen::MatrixXd family_covariance(const FamilyParams& params) {
  if (params.tag.kind == FamilyKind::weibull)
    throw Error(ErrorKind::unsupported_tag, "family_covariance needs a Normal/MVN member");
  const int p = params.tag.dim;
  Eigen::MatrixXd cov(p, p);
  for (int i = 0; i < p; ++i) {
    cov(i, i) = params.values(p + i) * params.values(p + i);
    for (int j = i + 1; j < p; ++j)
      cov(i, j) = cov(j, i) = params.values(static_cast<Eigen::Index>(mvn_offdiag_index(p, i, j)));
  }
  return cov;
}

FamilyParams estimate_params(const Eigen::MatrixXd& samples, FamilyTag tag) {
  const Eigen::Index n = samples.rows();
  if (n < 2) throw Error(ErrorKind::argument, "estimate_params needs at least two samples");
  if (samples.cols() != tag.dim)
    throw Error(ErrorKind::shape, "sample columns do not match family dimension");
  if (!samples.allFinite()) throw Error(ErrorKind::argument, "non-finite samples");

  if (tag.kind == FamilyKind::weibull) {
    const Eigen::VectorXd x = samples.col(0);
    if ((x.array() <= 0.0).any()) throw Error(ErrorKind::domain, "Weibull samples must be positive");
    const double k = weibull_shape_mle(x);
    const double gm = std::exp(x.array().log().mean());
    const double mean_pow = (x.array() / gm).pow(k).mean();
    return make_weibull(gm * std::pow(mean_pow, 1.0 / k), k);
  }

  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    if (!(cov(i, i) > 0.0))
      throw Error(ErrorKind::degenerate_sample, "zero sample variance in column " + std::to_string(i));
  FamilyParams out = make_mvn(mean.transpose(), cov);
  out.tag = tag;
  return out;
}

Eigen::MatrixXd sample_family(const FamilyParams& params, std::size_t n, RngStream& rng) {
  params.validate();
  const auto rows = static_cast<Eigen::Index>(n);
  if (params.tag.kind == FamilyKind::weibull) {
    Eigen::MatrixXd out(rows, 1);
    const double scale = params.values(0), shape = params.values(1);
    for (Eigen::Index i = 0; i < rows; ++i)
      out(i, 0) = scale * std::pow(-std::log(rng.uniform_open()), 1.0 / shape);
    return out;
  }
  const int p = params.tag.dim;
  if (p == 1) {
    Eigen::MatrixXd out(rows, 1);
    for (Eigen::Index i = 0; i < rows; ++i) out(i, 0) = params.values(0) + params.values(1) * rng.normal();
    return out;
  }
  const Eigen::MatrixXd cov = family_covariance(params);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -tol) throw Error(ErrorKind::shape, "MVN covariance is not positive semi-definite");
  const Eigen::MatrixXd root = eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Eigen::VectorXd mean = family_mean(params);
  Eigen::MatrixXd out(rows, p);
  Eigen::VectorXd z(p);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (int j = 0; j < p; ++j) z(j) = rng.normal();
    out.row(i) = (mean + root * z).transpose();
  }
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double u) {
  check_u(u);
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

double normal_log_pdf(double x, double mean, double sd) {
  if (sd == 0.0) return x == mean ? kInf : -kInf;
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

double quantile(const FamilyParams& params, double u) {
  check_u(u);
  params.validate();
  switch (params.tag.kind) {
    case FamilyKind::weibull:
      return params.values(0) * std::pow(-std::log1p(-u), 1.0 / params.values(1));
    case FamilyKind::normal:
    case FamilyKind::mvn:
      if (params.tag.dim != 1)
        throw Error(ErrorKind::unsupported_tag, "quantile of a multivariate member; use a linear combination");
      return params.values(0) + params.values(1) * normal_quantile(u);
  }
  return 0.0;
}

double cdf(const FamilyParams& params, double x) {
  switch (params.tag.kind) {
    case FamilyKind::weibull:
      if (x <= 0) return 0.0;
      return -std::expm1(-std::pow(x / params.values(0), params.values(1)));
    case FamilyKind::normal:
    case FamilyKind::mvn:
      if (params.tag.dim != 1) throw Error(ErrorKind::unsupported_tag, "cdf of a multivariate member");
      if (params.values(1) == 0.0) return x >= params.values(0) ? 1.0 : 0.0;
      return normal_cdf((x - params.values(0)) / params.values(1));
  }
  return 0.0;
}

double log_density(const FamilyParams& params, double x) {
  switch (params.tag.kind) {
    case FamilyKind::weibull: {
      if (x <= 0) return -kInf;
      const double scale = params.values(0), shape = params.values(1);
      const double lz = std::log(x / scale);
      return std::log(shape / scale) + (shape - 1.0) * lz - std::exp(shape * lz);
    }
    case FamilyKind::normal:
    case FamilyKind::mvn:
      if (params.tag.dim != 1) throw Error(ErrorKind::shape, "scalar point for a multivariate member");
      return normal_log_pdf(x, params.values(0), params.values(1));
  }
  return -kInf;
}

double log_density(const FamilyParams& params, const Eigen::VectorXd& x) {
  if (x.size() != params.tag.dim) throw Error(ErrorKind::shape, "point dimension mismatch");
  if (params.tag.dim == 1) return log_density(params, x(0));
  const Eigen::MatrixXd cov = family_covariance(params);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::singular, "MVN covariance not positive definite");
  const Eigen::VectorXd r = x - family_mean(params);
  const Eigen::VectorXd w = llt.matrixL().solve(r);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * w.squaredNorm() - 0.5 * logdet - params.tag.dim * kLogSqrt2Pi;
}

double log_density(const AuxDistribution& dist, double x) {
  if (const auto* b = std::get_if<BetaDist>(&dist)) {
    if (!(x > 0.0 && x < 1.0)) {
      // Endpoints carry mass only when the exponent is exactly zero there.
      if (x == 0.0 && b->a == 1.0) return -boost::math::lgamma(b->a) - lgamma_safe(b->b) + lgamma_safe(b->a + b->b);
      if (x == 1.0 && b->b == 1.0) return -boost::math::lgamma(b->a) - lgamma_safe(b->b) + lgamma_safe(b->a + b->b);
      return -kInf;
    }
    return (b->a - 1.0) * std::log(x) + (b->b - 1.0) * std::log1p(-x) + lgamma_safe(b->a + b->b) -
           lgamma_safe(b->a) - lgamma_safe(b->b);
  }
  if (x < 0 || x != std::floor(x)) return -kInf;
  if (const auto* bin = std::get_if<BinomialDist>(&dist)) {
    const double nt = static_cast<double>(bin->trials);
    if (x > nt) return -kInf;
    const double phi = bin->prob;
    if (!(phi >= 0.0 && phi <= 1.0)) return -kInf;
    const double log_choose = lgamma_safe(nt + 1) - lgamma_safe(x + 1) - lgamma_safe(nt - x + 1);
    double out = log_choose;
    if (x > 0) out += phi == 0.0 ? -kInf : x * std::log(phi);
    if (nt - x > 0) out += phi == 1.0 ? -kInf : (nt - x) * std::log1p(-phi);
    return out;
  }
  const auto& pois = std::get<PoissonDist>(dist);
  if (pois.rate == 0.0) return x == 0.0 ? 0.0 : -kInf;
  return x * std::log(pois.rate) - pois.rate - lgamma_safe(x + 1.0);
}

}  // namespace cutpost
