#include "cutpost/seqecp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "cutpost/error.hpp"
#include "cutpost/gp.hpp"
#include "cutpost/parallel.hpp"

namespace cutpost {

namespace {

void check_level(double u) {
  if (!(u > 0.0 && u < 1.0)) throw Error(ErrorKind::argument, "quantile level must lie in (0, 1)");
}

void check_variances(std::initializer_list<double> vars) {
  for (double v : vars)
    if (!(v >= 0.0)) throw Error(ErrorKind::argument, "predictive variances must be non-negative");
}

Eigen::VectorXd combination(const Eigen::VectorXd& t, int p) {
  if (t.size() == 0) return Eigen::VectorXd::Ones(p);
  if (t.size() != p) throw Error(ErrorKind::shape, "combination vector has the wrong length");
  if (t.isZero(0.0)) throw Error(ErrorKind::argument, "combination vector is all zero");
  return t;
}

}  // namespace

double acquisition_normal(double mu_hat, double mu_var, double sigma_hat, double sigma_var, double u) {
  (void)mu_hat;
  (void)sigma_hat;
  check_level(u);
  check_variances({mu_var, sigma_var});
  const double z = normal_quantile(u);
  return mu_var + z * z * sigma_var;
}

double acquisition_weibull(double lambda_hat, double lambda_var, double kappa_hat, double kappa_var, double u) {
  check_level(u);
  check_variances({lambda_var, kappa_var});
  if (!(lambda_hat > 0.0 && kappa_hat > 0.0)) throw Error(ErrorKind::argument, "Weibull scale and shape must be positive");
  // Inverse shape and its Delta-method variance.
  const double k = 1.0 / kappa_hat;
  const double kv = kappa_var / std::pow(kappa_hat, 4);
  const double us = -std::log1p(-u);
  const double l2 = std::pow(std::log(us), 2);
  return std::pow(us, 2.0 * k) *
         (lambda_var * (1.0 + 2.0 * kv * l2) + lambda_hat * lambda_hat * kv * l2 * (1.0 - 0.25 * kv * l2));
}

double linear_combination_quantile(const FamilyParams& params, const Eigen::VectorXd& t, double u) {
  check_level(u);
  if (params.tag.kind == FamilyKind::weibull) throw Error(ErrorKind::unsupported_tag, "linear combinations need a Normal/MVN member");
  const Eigen::VectorXd tt = combination(t, params.tag.dim);
  Eigen::MatrixXd cov = family_covariance(params);
  if (!is_psd(cov)) cov = nearest_psd(cov);
  const double v = tt.dot(cov * tt);
  if (v < -1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::numerical, "negative combined variance after PSD repair");
  return tt.dot(family_mean(params)) + normal_quantile(u) * std::sqrt(std::max(0.0, v));
}

double acquisition_mvn(int p, const Eigen::VectorXd& mean, const Eigen::VectorXd& var, const Eigen::VectorXd& t,
                       double u, DeltaForm form) {
  check_level(u);
  const auto r = static_cast<Eigen::Index>(FamilyTag::mvn(p).param_count());
  if (mean.size() != r || var.size() != r) throw Error(ErrorKind::shape, "MVN acquisition inputs have the wrong length");
  if ((var.array() < 0.0).any() || !var.allFinite()) throw Error(ErrorKind::argument, "predictive variances must be non-negative");
  const Eigen::VectorXd tt = combination(t, p);
  const double z = normal_quantile(u);

  double var_d1 = 0, e_d2 = 0, var_d2 = 0;
  for (int i = 0; i < p; ++i) {
    const double s = mean(p + i), sv = var(p + i);
    var_d1 += tt(i) * tt(i) * var(i);
    e_d2 += tt(i) * tt(i) * s * s;
    // Variance of sigma_i^2 under a normal perturbation of sigma_i.
    const double var_s2 = 4.0 * s * s * sv + 2.0 * sv * sv;
    var_d2 += std::pow(tt(i), 4) * var_s2;
    if (form == DeltaForm::second_order) e_d2 += tt(i) * tt(i) * sv;
  }
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      const auto k = static_cast<Eigen::Index>(mvn_offdiag_index(p, i, j));
      e_d2 += 2.0 * tt(i) * tt(j) * mean(k);
      var_d2 += form == DeltaForm::printed ? 2.0 * tt(i) * tt(j) * var(k) : 4.0 * tt(i) * tt(i) * tt(j) * tt(j) * var(k);
    }
  if (!(e_d2 > 0.0)) throw Error(ErrorKind::domain, "combined variance of the linear combination is not positive");

  const double root = std::sqrt(e_d2);
  const double e_root = form == DeltaForm::printed
                            ? root - 0.5 * std::pow(1.0 / (16.0 * e_d2), 1.5) * var_d2
                            : root - var_d2 / (8.0 * e_d2 * root);
  // [E d1^2 + z^2 E d2 + 2 z E d1 E sqrt(d2)] - [E d1 + z E sqrt(d2)]^2
  const double spread = e_d2 - e_root * e_root;
  return std::max(0.0, var_d1 + z * z * spread);
}

McAcquisition acquisition_mc(const FamilyTag& tag, const Eigen::VectorXd& mean, const Eigen::VectorXd& var, double u,
                             std::size_t n_mc, RngStream& rng, const Eigen::VectorXd& t) {
  check_level(u);
  if (n_mc < 1000) throw Error(ErrorKind::argument, "Monte Carlo acquisition needs at least 1000 draws");
  const auto r = static_cast<Eigen::Index>(tag.param_count());
  if (mean.size() != r || var.size() != r) throw Error(ErrorKind::shape, "acquisition inputs have the wrong length");
  if ((var.array() < 0.0).any() || !var.allFinite()) throw Error(ErrorKind::argument, "predictive variances must be non-negative");
  const Eigen::VectorXd sd = var.cwiseSqrt();
  const Eigen::VectorXd tt = tag.kind == FamilyKind::weibull ? Eigen::VectorXd() : combination(t, tag.dim);

  McAcquisition out;
  const std::size_t max_attempts = 100 * n_mc;
  std::size_t attempts = 0;
  double mean_q = 0, m2 = 0;
  FamilyParams draw{tag, Eigen::VectorXd(r)};
  while (out.draws < n_mc) {
    if (++attempts > max_attempts)
      throw Error(ErrorKind::degenerate_sample, "Monte Carlo acquisition: almost every parameter draw is invalid");
    for (Eigen::Index j = 0; j < r; ++j) draw.values(j) = mean(j) + sd(j) * rng.normal();
    double q;
    if (tag.kind == FamilyKind::weibull) {
      if (!(draw.values(0) > 0.0 && draw.values(1) > 0.0)) {
        ++out.rejections;
        continue;
      }
      q = quantile(draw, u);
    } else {
      if ((draw.values.segment(tag.dim, tag.dim).array() <= 0.0).any() ||
          (tag.dim > 1 && !is_psd(family_covariance(draw)))) {
        ++out.rejections;
        continue;
      }
      q = linear_combination_quantile(draw, tt, u);
    }
    ++out.draws;
    const double d = q - mean_q;
    mean_q += d / static_cast<double>(out.draws);
    m2 += d * (q - mean_q);
  }
  out.value = m2 / static_cast<double>(out.draws - 1);
  out.ill_posed = 2 * out.rejections > out.rejections + out.draws;
  return out;
}

// ---------------------------------------------------------------------------

std::size_t SeqEcpConfig::resolved_build(std::size_t L) const {
  return build_budget ? build_budget : std::max<std::size_t>(3, L / 2);
}

void SeqEcpConfig::validate(const ProblemSpec& problem) const {
  ecp.validate(problem);
  const std::size_t L = ecp.resolved_budget(problem.q);
  const std::size_t L0 = resolved_build(L);
  if (L0 < 3 || L0 > L) throw Error(ErrorKind::config, "build budget must satisfy 3 <= L0 <= L");
  if (candidates < 10) throw Error(ErrorKind::config, "at least 10 candidates per round are needed");
  if (!(u > 0.0 && u < 1.0)) throw Error(ErrorKind::config, "quantile level must lie in (0, 1)");
  if (monte_carlo && mc_draws < 1000) throw Error(ErrorKind::config, "Monte Carlo acquisition needs at least 1000 draws");
  if (t.size() != 0 && t.size() != problem.p) throw Error(ErrorKind::config, "combination vector must have length p");
  if (!problem.prior.sampler) throw Error(ErrorKind::config, "sequential ECP draws candidates from the prior sampler");
}

void SeqEcpResult::write_trace_csv(std::ostream& os) const {
  const Eigen::Index q = trace.empty() ? 0 : trace.front().gamma.size();
  os << "round";
  for (Eigen::Index k = 0; k < q; ++k) os << ",gamma" << (k + 1);
  os << ",score,rejections,fallback\n";
  const auto old = os.precision(17);
  for (const auto& r : trace) {
    os << r.round;
    for (Eigen::Index k = 0; k < q; ++k) os << ',' << r.gamma(k);
    os << ',' << r.score << ',' << r.rejections << ',' << (r.fallback ? 1 : 0) << '\n';
  }
  os.precision(old);
}

std::vector<McAcquisition> score_candidates(const EmulatorBank& bank, const Eigen::MatrixXd& candidates,
                                            const SeqEcpConfig& cfg, const RngStream& rng) {
  const FamilyTag& tag = bank.tag();
  const SurfaceMoments mom = bank.predict_moments(candidates);
  const auto n = static_cast<std::size_t>(candidates.rows());
  std::vector<McAcquisition> out(n);
  parallel_for(n, cfg.ecp.threads, [&](std::size_t c) {
    const auto i = static_cast<Eigen::Index>(c);
    const Eigen::VectorXd m = mom.mean.row(i).transpose();
    const Eigen::VectorXd v = mom.var.row(i).transpose().cwiseMax(0.0);
    if (cfg.monte_carlo) {
      RngStream job = rng.derive(c);
      out[c] = acquisition_mc(tag, m, v, cfg.u, cfg.mc_draws, job, cfg.t);
      return;
    }
    switch (tag.kind) {
      case FamilyKind::normal:
        out[c].value = acquisition_normal(m(0), v(0), m(1), v(1), cfg.u);
        break;
      case FamilyKind::weibull:
        out[c].value = acquisition_weibull(m(0), v(0), m(1), v(1), cfg.u);
        break;
      case FamilyKind::mvn:
        out[c].value = acquisition_mvn(tag.dim, m, v, cfg.t, cfg.u, cfg.delta);
        break;
    }
  });
  return out;
}

SeqEcpResult sequential_ecp(const ProblemSpec& problem, const SeqEcpConfig& cfg, const RngStream& rng) {
  cfg.validate(problem);
  const EcpConfig& ecp = cfg.ecp;
  const std::size_t L = ecp.resolved_budget(problem.q);
  const std::size_t L0 = cfg.resolved_build(L);

  RngStream design_rng = rng.derive("design");
  DesignMatrix design = make_design(problem, ecp.design, L0, design_rng);
  if (ecp.inflate) design = inflate_variance(design, ecp.inflate->omega, problem.gamma_bounds, ecp.inflate->mode);
  const RngStream phase1_rng = rng.derive("phase1");
  Phase1Result phase1 = ecp_phase1(problem, ecp, design, phase1_rng);
  EmulatorBank bank = ecp_fit_bank(ecp, phase1, rng.derive("bootstrap"));

  SeqEcpResult out;
  const RngStream cand_rng = rng.derive("candidates");
  const RngStream score_rng = rng.derive("acquisition");
  for (std::size_t round = 1; L0 + round <= L; ++round) {
    RngStream draw = cand_rng.derive(round);
    Eigen::MatrixXd cands(static_cast<Eigen::Index>(cfg.candidates), problem.q);
    for (Eigen::Index c = 0; c < cands.rows(); ++c) cands.row(c) = problem.prior.sampler(draw).transpose();

    const std::vector<McAcquisition> scores = score_candidates(bank, cands, cfg, score_rng.derive(round));
    SeqRound rec;
    rec.round = round;
    std::size_t best = 0;
    for (std::size_t c = 0; c < scores.size(); ++c) {
      rec.rejections += scores[c].rejections;
      if (scores[c].value > scores[best].value) best = c;
    }
    rec.score = scores[best].value;
    if (!(rec.score > 0.0)) {
      // Nothing to learn anywhere: keep the design space-filling instead.
      rec.fallback = true;
      Eigen::MatrixXd trial(phase1.design.points.rows() + 1, problem.q);
      trial.topRows(phase1.design.points.rows()) = phase1.design.points;
      double best_energy = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < cands.rows(); ++c) {
        trial.bottomRows(1) = cands.row(c);
        const double e = design_energy(trial, cands);
        if (e < best_energy) {
          best_energy = e;
          best = static_cast<std::size_t>(c);
        }
      }
    }
    rec.gamma = cands.row(static_cast<Eigen::Index>(best)).transpose();
    ecp_phase1_extend(problem, ecp, rec.gamma, phase1_rng, phase1);
    bank = ecp_fit_bank(ecp, phase1, rng.derive("bootstrap"));
    out.trace.push_back(std::move(rec));
  }

  if (!out.trace.empty()) phase1.design.provenance = design.provenance + "+sequential";
  out.ecp = ecp_phase2(problem, ecp, std::move(bank), std::move(phase1.design), rng.derive("phase2"));
  return out;
}

}  // namespace cutpost
