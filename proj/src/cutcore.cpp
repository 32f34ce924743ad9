#include "cutpost/cutcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <map>
#include <ostream>

#include "cutpost/error.hpp"
#include "cutpost/parallel.hpp"
#include "cutpost/sampler.hpp"

namespace cutpost {

namespace {

Error annotate(const Error& e, const std::string& where) { return Error(e.kind(), where + ": " + e.what()); }

bool log_emulated(const FamilyTag& tag, int j) {
  switch (tag.kind) {
    case FamilyKind::weibull: return true;
    case FamilyKind::normal: return j == 1;
    case FamilyKind::mvn: return j >= tag.dim && j < 2 * tag.dim;
  }
  return false;
}

// Family member from one row of emulation-scale values.
FamilyParams from_surface_scale(const FamilyTag& tag, const Eigen::VectorXd& v, std::size_t* repairs) {
  switch (tag.kind) {
    case FamilyKind::normal: return make_normal(v(0), std::exp(v(1)));
    case FamilyKind::weibull: return make_weibull(std::exp(v(0)), std::exp(v(1)));
    case FamilyKind::mvn: {
      const int p = tag.dim;
      Eigen::MatrixXd cov(p, p);
      for (int i = 0; i < p; ++i) {
        cov(i, i) = std::exp(2.0 * v(p + i));
        for (int j = i + 1; j < p; ++j)
          cov(i, j) = cov(j, i) = v(static_cast<Eigen::Index>(mvn_offdiag_index(p, i, j)));
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < 0.0) {
        cov = nearest_psd(cov);
        if (repairs) ++*repairs;
      }
      return make_mvn(v.head(p), cov);
    }
  }
  throw Error(ErrorKind::unsupported_tag, "unknown family");
}

// Empirical quantile of a sorted column.
QuantileFn empirical_quantile(Eigen::VectorXd column) {
  std::sort(column.data(), column.data() + column.size());
  auto sorted = std::make_shared<const Eigen::VectorXd>(std::move(column));
  return [sorted](double u) {
    const double pos = u * static_cast<double>(sorted->size()) - 0.5;
    const auto last = sorted->size() - 1;
    if (pos <= 0) return (*sorted)(0);
    if (pos >= static_cast<double>(last)) return (*sorted)(last);
    const auto i = static_cast<Eigen::Index>(pos);
    const double f = pos - static_cast<double>(i);
    return (1 - f) * (*sorted)(i) + f * (*sorted)(i + 1);
  };
}

std::vector<QuantileFn> margin_quantiles(const ProblemSpec& problem) {
  if (!problem.prior.quantiles.empty()) return problem.prior.quantiles;
  std::vector<QuantileFn> out;
  if (problem.prior.pool)
    for (Eigen::Index k = 0; k < problem.prior.pool->cols(); ++k) out.push_back(empirical_quantile(problem.prior.pool->col(k)));
  return out;
}

// Exact duplicate rows are merged and their targets averaged.
void merge_duplicates(Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
  std::map<std::vector<double>, std::vector<Eigen::Index>> groups;
  std::vector<std::vector<double>> order;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    std::vector<double> key(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index k = 0; k < X.cols(); ++k) key[static_cast<std::size_t>(k)] = X(i, k);
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(i);
  }
  if (order.size() == static_cast<std::size_t>(X.rows())) return;
  Eigen::MatrixXd Xm(static_cast<Eigen::Index>(order.size()), X.cols());
  Eigen::MatrixXd Ym(static_cast<Eigen::Index>(order.size()), Y.cols());
  for (std::size_t g = 0; g < order.size(); ++g) {
    const auto& rows = groups[order[g]];
    const auto r = static_cast<Eigen::Index>(g);
    Xm.row(r) = X.row(rows.front());
    Ym.row(r).setZero();
    for (auto i : rows) Ym.row(r) += Y.row(i);
    Ym.row(r) /= static_cast<double>(rows.size());
  }
  X = std::move(Xm);
  Y = std::move(Ym);
}

}  // namespace

// ------------------------------------------------------------ approximation

CutApproximation::CutApproximation(Mixture mix) {
  if (mix.components.empty()) throw Error(ErrorKind::argument, "mixture without components");
  for (const auto& c : mix.components) {
    if (!(c.tag == mix.tag)) throw Error(ErrorKind::shape, "mixture components of different families");
    c.validate();
  }
  data_ = std::move(mix);
}

int CutApproximation::dim() const {
  return is_mixture() ? mixture().tag.dim : static_cast<int>(raw().draws.cols());
}

std::size_t CutApproximation::size() const {
  return is_mixture() ? mixture().components.size() : static_cast<std::size_t>(raw().draws.rows());
}

Eigen::MatrixXd CutApproximation::sample(std::size_t n, RngStream& rng) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), dim());
  if (!is_mixture()) {
    const auto& d = raw().draws;
    for (std::size_t i = 0; i < n; ++i)
      out.row(static_cast<Eigen::Index>(i)) = d.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(d.rows()))));
    return out;
  }
  const auto& comps = mixture().components;
  const std::size_t offset = rng.below(comps.size());
  for (std::size_t i = 0; i < n; ++i)
    out.row(static_cast<Eigen::Index>(i)) = sample_family(comps[(offset + i) % comps.size()], 1, rng).row(0);
  return out;
}

void CutApproximation::write_csv(std::ostream& os) const {
  if (is_mixture()) throw Error(ErrorKind::unsupported_tag, "write_csv applies to raw samples; use to_json");
  const auto& d = raw().draws;
  for (Eigen::Index k = 0; k < d.cols(); ++k) os << (k ? "," : "") << "alpha" << (k + 1);
  os << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index k = 0; k < d.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", d(i, k));
      os << (k ? "," : "") << buf;
    }
    os << '\n';
  }
}

std::string CutApproximation::to_json() const {
  nlohmann::json j;
  if (!is_mixture()) {
    j["kind"] = "samples";
    j["rows"] = raw().draws.rows();
    j["cols"] = raw().draws.cols();
    return j.dump();
  }
  j["kind"] = "mixture";
  j["family"] = mixture().tag.name();
  auto& comps = j["components"] = nlohmann::json::array();
  for (const auto& c : mixture().components) comps.push_back(std::vector<double>(c.values.data(), c.values.data() + c.values.size()));
  return j.dump();
}

double mixture_density(const Mixture& mix, const Eigen::VectorXd& x) {
  if (mix.components.empty()) throw Error(ErrorKind::argument, "mixture without components");
  double total = 0.0;
  for (const auto& c : mix.components) total += std::exp(log_density(c, x));
  return total / static_cast<double>(mix.components.size());
}

double mixture_marginal_cdf(const Mixture& mix, int margin, double x) {
  if (margin < 0 || margin >= mix.tag.dim) throw Error(ErrorKind::argument, "margin out of range");
  double total = 0.0;
  for (const auto& c : mix.components) {
    if (c.tag.kind == FamilyKind::mvn) {
      const int p = c.tag.dim;
      const double sd = c.values(p + margin);
      const double mean = c.values(margin);
      total += sd > 0 ? normal_cdf((x - mean) / sd) : (x >= mean ? 1.0 : 0.0);
    } else {
      total += cdf(c, x);
    }
  }
  return total / static_cast<double>(mix.components.size());
}

// ------------------------------------------------------------------ designs

DesignMatrix make_design(const ProblemSpec& problem, DesignMethod method, std::size_t L, RngStream& rng) {
  if (L < 1) throw Error(ErrorKind::argument, "design size must be positive");
  switch (method) {
    case DesignMethod::iid: return iid_design(problem.prior.sampler, L, rng);
    case DesignMethod::lhs: {
      const auto q = margin_quantiles(problem);
      if (q.empty()) throw Error(ErrorKind::config, "LHS needs marginal quantiles or a prior pool");
      return lhs_design(q, L, rng);
    }
    case DesignMethod::support: {
      if (problem.prior.pool) {
        if (static_cast<std::size_t>(problem.prior.pool->rows()) < L)
          throw Error(ErrorKind::config, "support points: pool smaller than the design");
        return support_points(*problem.prior.pool, L, rng);
      }
      if (problem.q == 1 && !problem.prior.quantiles.empty()) return support_points(problem.prior.quantiles[0], L, rng);
      throw Error(ErrorKind::config, "support points need a prior pool or a univariate quantile function");
    }
    case DesignMethod::mined: {
      const auto q = margin_quantiles(problem);
      const DesignMatrix init = q.empty() ? iid_design(problem.prior.sampler, L, rng) : lhs_design(q, L, rng);
      return mined_design(problem.prior.log_density, L, init, problem.gamma_bounds, rng);
    }
  }
  throw Error(ErrorKind::config, "unknown design method");
}

Eigen::MatrixXd conditional_draws(const ProblemSpec& problem, const Eigen::VectorXd& gamma, std::size_t m,
                                  const RngStream& rng) {
  const ChainStart start = problem.chain_start ? problem.chain_start(gamma)
                                               : ChainStart{Eigen::VectorXd::Zero(problem.p), std::nullopt, 0.1};
  McmcConfig mc;
  mc.n_samples = m;
  mc.initial_step_scale = start.step_scale;
  mc.initial_covariance = start.proposal_covariance;
  mc.seed = rng.seed();
  mc.stream = rng.id();
  return adaptive_metropolis(problem.conditional(gamma), start.init, mc).states;
}

// ------------------------------------------------------------ direct sampling

CutApproximation direct_sample_at(const ProblemSpec& problem, const Eigen::MatrixXd& gammas, std::size_t m,
                                  const RngStream& rng, std::size_t threads) {
  const auto L = static_cast<std::size_t>(gammas.rows());
  if (L * m < 1) throw Error(ErrorKind::argument, "direct sampling needs L*m >= 1");
  if (gammas.cols() != problem.q) throw Error(ErrorKind::shape, "gamma locations have the wrong dimension");
  RawSamples out;
  out.draws.resize(static_cast<Eigen::Index>(L * m), problem.p);
  parallel_for(L, threads, [&](std::size_t l) {
    try {
      const auto draws = conditional_draws(problem, gammas.row(static_cast<Eigen::Index>(l)).transpose(), m, rng.derive(l));
      out.draws.middleRows(static_cast<Eigen::Index>(l * m), static_cast<Eigen::Index>(m)) = draws;
    } catch (const Error& e) {
      throw annotate(e, "gamma location " + std::to_string(l));
    }
  });
  return CutApproximation(std::move(out));
}

CutApproximation direct_sample(const ProblemSpec& problem, std::size_t L, std::size_t m, DesignMethod method,
                               const RngStream& rng, std::size_t threads) {
  RngStream design_rng = rng.derive("design");
  const DesignMatrix design = make_design(problem, method, L, design_rng);
  return direct_sample_at(problem, design.points, m, rng.derive("chains"), threads);
}

CutApproximation little_aggregate(const CutApproximation& samples) {
  if (samples.is_mixture()) throw Error(ErrorKind::argument, "little_aggregate takes raw samples");
  const auto& d = samples.raw().draws;
  const int p = static_cast<int>(d.cols());
  if (d.rows() < p + 2) throw Error(ErrorKind::argument, "too few samples to aggregate");
  const FamilyTag tag = p == 1 ? FamilyTag::normal() : FamilyTag::mvn(p);
  return CutApproximation(Mixture{tag, {estimate_params(d, tag)}});
}

// --------------------------------------------------------------------- ECP

std::size_t default_budget(int q) { return (std::size_t{1} << q) + 4 * static_cast<std::size_t>(q) + 1; }

std::size_t EcpConfig::resolved_budget(int q) const { return budget.value_or(default_budget(q)); }

void EcpConfig::validate(const ProblemSpec& problem) const {
  const std::size_t L = resolved_budget(problem.q);
  if (L < 3) throw Error(ErrorKind::config, "ECP budget must be at least 3");
  if (phase1 == Phase1Method::mcmc && samples_per_location < 3)
    throw Error(ErrorKind::config, "ECP needs at least 3 samples per location");
  if (!prediction_points && prediction_size < 1) throw Error(ErrorKind::config, "prediction size must be positive");
  if (prediction_points && prediction_points->cols() != problem.q)
    throw Error(ErrorKind::config, "prediction points have the wrong dimension");
  if (family.dim != problem.p)
    throw Error(ErrorKind::config, "family " + family.name() + " does not match alpha dimension " + std::to_string(problem.p));
  if (phase1 == Phase1Method::laplace && family.kind == FamilyKind::weibull)
    throw Error(ErrorKind::config, "the Laplace route gives Gaussian fits only");
  if (bootstrap) {
    if (*bootstrap < 1) throw Error(ErrorKind::config, "bootstrap count must be positive");
    if (*bootstrap >= 2 && phase1 == Phase1Method::laplace)
      throw Error(ErrorKind::config, "bootstrap needs MCMC draws");
    if (*bootstrap >= 2 && samples_per_location < 10)
      throw Error(ErrorKind::config, "bootstrap needs at least 10 samples per location");
  }
  if (inflate && !(inflate->omega > 0)) throw Error(ErrorKind::config, "inflation factor must be positive");
}

Eigen::VectorXd to_surface_scale(const FamilyParams& params) {
  Eigen::VectorXd v = params.values;
  for (Eigen::Index j = 0; j < v.size(); ++j)
    if (log_emulated(params.tag, static_cast<int>(j))) v(j) = std::log(v(j));
  return v;
}

std::vector<std::string> surface_names(const FamilyTag& tag) {
  switch (tag.kind) {
    case FamilyKind::normal: return {"mean", "log_sd"};
    case FamilyKind::weibull: return {"log_scale", "log_shape"};
    case FamilyKind::mvn: {
      const int p = tag.dim;
      std::vector<std::string> out(tag.param_count());
      for (int i = 0; i < p; ++i) {
        out[static_cast<std::size_t>(i)] = "mean" + std::to_string(i + 1);
        out[static_cast<std::size_t>(p + i)] = "log_sd" + std::to_string(i + 1);
        for (int j = i + 1; j < p; ++j)
          out[mvn_offdiag_index(p, i, j)] = "cov" + std::to_string(i + 1) + std::to_string(j + 1);
      }
      return out;
    }
  }
  return {};
}

EmulatorBank EmulatorBank::fit(const FamilyTag& tag, const Eigen::MatrixXd& X, const Eigen::MatrixXd& targets,
                               const GpOptions& options, std::size_t threads) {
  if (static_cast<std::size_t>(targets.cols()) != tag.param_count())
    throw Error(ErrorKind::shape, "target columns do not match the family");
  if (targets.rows() != X.rows()) throw Error(ErrorKind::shape, "targets and inputs differ in rows");
  EmulatorBank bank;
  bank.tag_ = tag;
  bank.X_ = X;
  bank.names_ = surface_names(tag);
  const auto r = static_cast<std::size_t>(targets.cols());
  bank.surfaces_.resize(r);
  bank.log_scale_.resize(r);
  for (std::size_t j = 0; j < r; ++j) bank.log_scale_[j] = log_emulated(tag, static_cast<int>(j));
  parallel_for(r, threads, [&](std::size_t j) {
    try {
      bank.surfaces_[j] = GpModel::fit(X, targets.col(static_cast<Eigen::Index>(j)), options);
    } catch (const Error& e) {
      throw annotate(e, "surface " + bank.names_[j]);
    }
  });
  return bank;
}

std::vector<FamilyParams> EmulatorBank::predict(const Eigen::MatrixXd& gammas, std::size_t* repairs,
                                                std::size_t threads) const {
  const auto n = static_cast<std::size_t>(gammas.rows());
  std::vector<FamilyParams> out(n);
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<std::size_t> block_repairs(blocks, 0);
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t lo = b * kBlock, hi = std::min(n, lo + kBlock);
    Eigen::VectorXd v(static_cast<Eigen::Index>(surfaces_.size()));
    for (std::size_t i = lo; i < hi; ++i) {
      const Eigen::VectorXd g = gammas.row(static_cast<Eigen::Index>(i)).transpose();
      for (std::size_t j = 0; j < surfaces_.size(); ++j) v(static_cast<Eigen::Index>(j)) = surfaces_[j].predict_mean(g);
      out[i] = from_surface_scale(tag_, v, &block_repairs[b]);
    }
  });
  if (repairs)
    for (auto c : block_repairs) *repairs += c;
  return out;
}

SurfaceMoments EmulatorBank::predict_moments(const Eigen::MatrixXd& gammas) const {
  SurfaceMoments out;
  const auto r = static_cast<Eigen::Index>(surfaces_.size());
  out.mean.resize(gammas.rows(), r);
  out.var.resize(gammas.rows(), r);
  for (Eigen::Index j = 0; j < r; ++j) {
    const GpPrediction p = surfaces_[static_cast<std::size_t>(j)].predict(gammas);
    for (Eigen::Index i = 0; i < gammas.rows(); ++i) {
      const double m = p.mean(i), s2 = p.sd(i) * p.sd(i);
      if (log_scale_[static_cast<std::size_t>(j)]) {
        out.mean(i, j) = std::exp(m + 0.5 * s2);
        out.var(i, j) = std::expm1(s2) * std::exp(2 * m + s2);
      } else {
        out.mean(i, j) = m;
        out.var(i, j) = s2;
      }
    }
  }
  return out;
}

std::string EmulatorBank::to_json() const {
  nlohmann::json j;
  j["family"] = tag_.name();
  j["training_size"] = X_.rows();
  auto& s = j["surfaces"] = nlohmann::json::array();
  for (std::size_t k = 0; k < surfaces_.size(); ++k) {
    auto one = nlohmann::json::parse(surfaces_[k].to_json());
    one["name"] = names_[k];
    one["log_scale"] = static_cast<bool>(log_scale_[k]);
    s.push_back(std::move(one));
  }
  return j.dump();
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> ecp_bootstrap_augment(const Eigen::MatrixXd& gammas,
                                                                  const std::vector<Eigen::MatrixXd>& samples,
                                                                  std::size_t B, const FamilyTag& tag,
                                                                  const RngStream& rng) {
  if (B < 1) throw Error(ErrorKind::argument, "bootstrap count must be positive");
  if (samples.size() != static_cast<std::size_t>(gammas.rows()))
    throw Error(ErrorKind::shape, "one sample set per location is required");
  const auto L = static_cast<Eigen::Index>(samples.size());
  const auto Bi = static_cast<Eigen::Index>(B);
  Eigen::MatrixXd X(L * Bi, gammas.cols());
  Eigen::MatrixXd Y(L * Bi, static_cast<Eigen::Index>(tag.param_count()));
  for (Eigen::Index l = 0; l < L; ++l) {
    const auto& s = samples[static_cast<std::size_t>(l)];
    for (Eigen::Index b = 0; b < Bi; ++b) {
      const Eigen::Index row = l * Bi + b;
      X.row(row) = gammas.row(l);
      if (B == 1) {
        Y.row(row) = to_surface_scale(estimate_params(s, tag)).transpose();
        continue;
      }
      RngStream r = rng.derive(static_cast<std::uint64_t>(l)).derive(static_cast<std::uint64_t>(b));
      Eigen::MatrixXd re(s.rows(), s.cols());
      for (Eigen::Index i = 0; i < s.rows(); ++i) re.row(i) = s.row(static_cast<Eigen::Index>(r.below(static_cast<std::uint64_t>(s.rows()))));
      Y.row(row) = to_surface_scale(estimate_params(re, tag)).transpose();
    }
  }
  return {X, Y};
}

void ecp_phase1_extend(const ProblemSpec& problem, const EcpConfig& cfg, const Eigen::VectorXd& gamma,
                       const RngStream& rng, Phase1Result& result) {
  const auto index = static_cast<std::size_t>(result.design.points.rows());
  result.design.points.conservativeResize(static_cast<Eigen::Index>(index + 1), problem.q);
  result.design.points.row(static_cast<Eigen::Index>(index)) = gamma.transpose();
  RngStream job = rng.derive(index);
  try {
    if (cfg.phase1 == Phase1Method::laplace) {
      const ChainStart start = problem.chain_start(gamma);
      result.estimates.push_back(laplace_fit(problem.conditional(gamma), start.init, job.next_u64()).params);
    } else {
      result.samples.push_back(conditional_draws(problem, gamma, cfg.samples_per_location, job));
      result.estimates.push_back(estimate_params(result.samples.back(), cfg.family));
    }
  } catch (const Error& e) {
    throw annotate(e, "gamma location " + std::to_string(index));
  }
}

Phase1Result ecp_phase1(const ProblemSpec& problem, const EcpConfig& cfg, const DesignMatrix& design,
                        const RngStream& rng) {
  const auto L = static_cast<std::size_t>(design.points.rows());
  Phase1Result out;
  out.design = design;
  out.estimates.resize(L);
  if (cfg.phase1 == Phase1Method::mcmc) out.samples.resize(L);
  parallel_for(L, cfg.threads, [&](std::size_t l) {
    const Eigen::VectorXd gamma = design.points.row(static_cast<Eigen::Index>(l)).transpose();
    RngStream job = rng.derive(l);
    try {
      if (cfg.phase1 == Phase1Method::laplace) {
        const ChainStart start = problem.chain_start(gamma);
        out.estimates[l] = laplace_fit(problem.conditional(gamma), start.init, job.next_u64()).params;
      } else {
        out.samples[l] = conditional_draws(problem, gamma, cfg.samples_per_location, job);
        out.estimates[l] = estimate_params(out.samples[l], cfg.family);
      }
    } catch (const Error& e) {
      throw annotate(e, "gamma location " + std::to_string(l));
    }
  });
  return out;
}

EmulatorBank ecp_fit_bank(const EcpConfig& cfg, const Phase1Result& phase1, const RngStream& rng) {
  GpOptions gp = cfg.gp;
  if (cfg.phase1 == Phase1Method::mcmc && cfg.estimate_target_noise) gp.estimate_noise = true;
  Eigen::MatrixXd X, Y;
  if (cfg.bootstrap && *cfg.bootstrap >= 2) {
    std::tie(X, Y) = ecp_bootstrap_augment(phase1.design.points, phase1.samples, *cfg.bootstrap, cfg.family, rng);
    gp.estimate_noise = true;
  } else {
    X = phase1.design.points;
    Y.resize(X.rows(), static_cast<Eigen::Index>(cfg.family.param_count()));
    for (Eigen::Index l = 0; l < X.rows(); ++l) Y.row(l) = to_surface_scale(phase1.estimates[static_cast<std::size_t>(l)]).transpose();
    if (!gp.estimate_noise) merge_duplicates(X, Y);
  }
  return EmulatorBank::fit(cfg.family, X, Y, gp, cfg.threads);
}

Eigen::MatrixXd ecp_prediction_points(const ProblemSpec& problem, const EcpConfig& cfg, const RngStream& rng) {
  if (cfg.prediction_points) return *cfg.prediction_points;
  const std::size_t M = cfg.prediction_size;
  RngStream r = rng;
  if (cfg.prediction_design != DesignMethod::support) return make_design(problem, cfg.prediction_design, M, r).points;
  if (problem.prior.pool) {
    const auto& pool = *problem.prior.pool;
    if (static_cast<std::size_t>(pool.rows()) == M) return pool;
    if (static_cast<std::size_t>(pool.rows()) < M) return iid_design(problem.prior.sampler, M, r).points;
    SupportOptions opt;
    opt.max_iterations = 100;
    return support_points(pool, M, r, opt).points;
  }
  if (problem.q == 1 && !problem.prior.quantiles.empty()) {
    // One-dimensional support points sit at the midpoint quantiles.
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(M), 1);
    for (std::size_t i = 0; i < M; ++i)
      pts(static_cast<Eigen::Index>(i), 0) = problem.prior.quantiles[0]((static_cast<double>(i) + 0.5) / static_cast<double>(M));
    return pts;
  }
  return iid_design(problem.prior.sampler, M, r).points;
}

EcpResult ecp_phase2(const ProblemSpec& problem, const EcpConfig& cfg, EmulatorBank bank, DesignMatrix design,
                     const RngStream& rng) {
  EcpResult out;
  out.prediction_points = ecp_prediction_points(problem, cfg, rng);
  std::size_t repairs = 0;
  auto comps = bank.predict(out.prediction_points, &repairs, cfg.threads);
  out.psd_repairs = repairs;
  if (static_cast<double>(repairs) > 0.2 * static_cast<double>(comps.size()))
    out.warnings.push_back("covariance repaired for " + std::to_string(repairs) + " of " + std::to_string(comps.size()) +
                           " components");
  out.approximation = CutApproximation(Mixture{cfg.family, std::move(comps)});
  out.bank = std::move(bank);
  out.training_design = std::move(design);
  return out;
}

EcpResult ecp_sample(const ProblemSpec& problem, const EcpConfig& cfg, const RngStream& rng) {
  cfg.validate(problem);
  RngStream design_rng = rng.derive("design");
  DesignMatrix design = make_design(problem, cfg.design, cfg.resolved_budget(problem.q), design_rng);
  if (cfg.inflate) design = inflate_variance(design, cfg.inflate->omega, problem.gamma_bounds, cfg.inflate->mode);
  const Phase1Result phase1 = ecp_phase1(problem, cfg, design, rng.derive("phase1"));
  EmulatorBank bank = ecp_fit_bank(cfg, phase1, rng.derive("bootstrap"));
  return ecp_phase2(problem, cfg, std::move(bank), std::move(design), rng.derive("phase2"));
}

}  // namespace cutpost
