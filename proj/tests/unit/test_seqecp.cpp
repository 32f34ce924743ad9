#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "../common/acquisition_battery.hpp"
#include "cutpost/diagnostics.hpp"
#include "cutpost/error.hpp"
#include "cutpost/seqecp.hpp"

using namespace cutpost;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_SUITE("seqecp") {
  TEST_CASE("normal acquisition examples") {
    CHECK(acquisition_normal(1.0, 0.3, 2.0, 0.7, 0.5) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(acquisition_normal(1.0, 0.0, 2.0, 0.0, 0.9) == 0.0);
    const double z = 1.959963984540054;
    CHECK(std::abs(acquisition_normal(0.0, 0.04, 1.0, 0.01, 0.975) - (0.04 + z * z * 0.01)) < 1e-12);
    CHECK(std::abs(acquisition_normal(0.0, 0.04, 1.0, 0.01, 0.975) - 0.078415) < 1e-5);
    CHECK_THROWS_AS(acquisition_normal(0, -1, 1, 0, 0.9), Error);
    CHECK_THROWS_AS(acquisition_normal(0, 1, 1, 0, 1.0), Error);
  }

  TEST_CASE("normal acquisition matches Monte Carlo over the predictive normals") {
    battery::Instance in{FamilyTag::normal(), Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.04, 0.01), 0.975};
    const double mc = battery::mc_reference(in, 1000000, 3);
    const double exact = acquisition_normal(0.0, 0.04, 1.0, 0.01, 0.975);
    CHECK(std::abs(mc - exact) < 3 * exact * std::sqrt(2.0 / 1e6));
  }

  TEST_CASE("acquisition is affine and monotone in the predictive variances") {
    for (double c : {1.5, 3.0, 10.0}) {
      const double base = acquisition_normal(0, 0.02, 1, 0.01, 0.8);
      CHECK(acquisition_normal(0, c * 0.02, 1, c * 0.01, 0.8) == doctest::Approx(c * base));
      CHECK(acquisition_weibull(2, c * 0.01, 1.5, c * 0.02, 0.8) >= acquisition_weibull(2, 0.01, 1.5, 0.02, 0.8));
    }
  }

  TEST_CASE("Weibull acquisition examples") {
    CHECK(acquisition_weibull(2.0, 0.0, 1.5, 0.0, 0.9) == 0.0);
    const double u = 1.0 - std::exp(-1.0);
    CHECK(acquisition_weibull(2.0, 0.037, 1.5, 0.02, u) == doctest::Approx(0.037).epsilon(1e-12));
    battery::Instance in{FamilyTag::weibull(), Eigen::Vector2d(2.0, 1.5), Eigen::Vector2d(0.01, 0.02), 0.9};
    const double mc = battery::mc_reference(in, 1000000, 4);
    const double delta = acquisition_weibull(2.0, 0.01, 1.5, 0.02, 0.9);
    MESSAGE("Weibull delta " << delta << " vs MC " << mc);
    CHECK(rel_gap(delta, mc) < 0.25);
    CHECK_THROWS_AS(acquisition_weibull(-1, 0.1, 1, 0.1, 0.5), Error);
  }

  TEST_CASE("linear combination quantile") {
    const FamilyParams n = make_normal(1.5, 0.7);
    CHECK(linear_combination_quantile(n, Eigen::VectorXd::Ones(1), 0.8) == doctest::Approx(quantile(n, 0.8)).epsilon(1e-14));
    const FamilyParams m = make_mvn(Eigen::Vector2d(1, 2), Eigen::Matrix2d::Identity());
    CHECK(linear_combination_quantile(m, Eigen::Vector2d(1, 1), 0.975) ==
          doctest::Approx(3 + 1.959963984540054 * std::sqrt(2.0)).epsilon(1e-12));
    Eigen::Matrix2d c;
    c << 4, 1.9, 1.9, 1;
    const FamilyParams cm = make_mvn(Eigen::Vector2d(-1, 0.5), c);
    CHECK(linear_combination_quantile(cm, Eigen::Vector2d(2, -3), 0.5) == doctest::Approx(-3.5).epsilon(1e-14));
    CHECK_THROWS_AS(linear_combination_quantile(cm, Eigen::Vector2d(0, 0), 0.9), Error);
    // A non-PSD covariance is repaired before use.
    FamilyParams bm = make_mvn(Eigen::Vector2d(0, 0), Eigen::Matrix2d::Identity());
    bm.values(4) = 2.0;
    const double q = linear_combination_quantile(bm, Eigen::Vector2d(1, -1), 0.9);
    CHECK(std::isfinite(q));
    CHECK(q == doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("MVN acquisition with zero variances and the univariate limit") {
    Eigen::VectorXd m(5), v = Eigen::VectorXd::Zero(5);
    m << 0.2, -0.4, 1.0, 1.5, 0.3;
    for (auto f : {DeltaForm::printed, DeltaForm::second_order}) CHECK(acquisition_mvn(2, m, v, {}, 0.9, f) == 0.0);

    // p = 1 against the normal closed form, sigma_var / sigma^2 < 0.05.
    const Eigen::Vector2d m1(0.5, 1.2), v1(0.01, 0.02);
    const double a = acquisition_mvn(1, m1, v1, Eigen::VectorXd::Ones(1), 0.95);
    const double b = acquisition_normal(m1(0), v1(0), m1(1), v1(1), 0.95);
    CHECK(rel_gap(a, b) < 0.1);

    Eigen::VectorXd zero(5);
    zero << 0, 0, 1, 1, -1;
    CHECK_THROWS_AS(acquisition_mvn(2, zero, Eigen::VectorXd::Zero(5), {}, 0.9), Error);
  }

  TEST_CASE("printed MVN correction is evaluated as written") {
    const Eigen::Vector2d m1(0.0, 2.0), v1(0.0, 0.04);
    const double e = 4.0;
    const double var_d2 = 4 * 4.0 * 0.04 + 2 * 0.04 * 0.04;
    const double root = 2.0 - 0.5 * std::pow(1.0 / (16 * e), 1.5) * var_d2;
    const double z = normal_quantile(0.9);
    CHECK(acquisition_mvn(1, m1, v1, {}, 0.9, DeltaForm::printed) == doctest::Approx(z * z * (e - root * root)).epsilon(1e-12));
  }

  TEST_CASE("Delta forms agree with Monte Carlo on the pinned battery") {
    for (auto kind : {FamilyKind::normal, FamilyKind::weibull, FamilyKind::mvn}) {
      const auto inst = battery::make(kind);
      int within = 0, within_printed = 0;
      double worst = 0;
      for (std::size_t i = 0; i < inst.size(); ++i) {
        const double mc = battery::mc_reference(inst[i], 100000, 1000 + i);
        const double gap = rel_gap(battery::delta_value(inst[i]), mc);
        worst = std::max(worst, gap);
        within += gap < 0.25;
        if (kind == FamilyKind::mvn)
          within_printed += rel_gap(battery::delta_value(inst[i], DeltaForm::printed), mc) < 0.25;
      }
      MESSAGE(FamilyTag{kind, kind == FamilyKind::mvn ? 2 : 1}.name() << ": worst gap " << worst);
      if (kind == FamilyKind::mvn) MESSAGE("printed correction within 25%: " << within_printed << " of " << inst.size());
      CHECK(within == static_cast<int>(inst.size()));
    }
  }

  TEST_CASE("Monte Carlo acquisition") {
    RngStream rng(21);
    const McAcquisition zero =
        acquisition_mc(FamilyTag::normal(), Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 0), 0.9, 1000, rng);
    CHECK(zero.value == 0.0);
    CHECK(zero.rejections == 0);

    const McAcquisition n =
        acquisition_mc(FamilyTag::normal(), Eigen::Vector2d(0, 1), Eigen::Vector2d(0.04, 0.01), 0.975, 100000, rng);
    const double exact = acquisition_normal(0, 0.04, 1, 0.01, 0.975);
    CHECK(std::abs(n.value - exact) < 3 * exact * std::sqrt(2.0 / 1e5));

    const McAcquisition w =
        acquisition_mc(FamilyTag::weibull(), Eigen::Vector2d(2, 1.5), Eigen::Vector2d(0.01, 0.02), 0.9, 100000, rng);
    CHECK(rel_gap(acquisition_weibull(2, 0.01, 1.5, 0.02, 0.9), w.value) < 0.25);

    // sd near zero with large variance: most draws are rejected.
    const McAcquisition ill =
        acquisition_mc(FamilyTag::normal(), Eigen::Vector2d(0, 0.01), Eigen::Vector2d(0.01, 1.0), 0.9, 1000, rng);
    CHECK(ill.rejections > 0);
    CHECK(ill.draws == 1000);
    const McAcquisition worse =
        acquisition_mc(FamilyTag::normal(), Eigen::Vector2d(0, -1.0), Eigen::Vector2d(0.01, 1.0), 0.9, 1000, rng);
    CHECK(worse.ill_posed);
    CHECK_THROWS_AS(acquisition_mc(FamilyTag::normal(), Eigen::Vector2d(0, 1), Eigen::Vector2d(0, 0), 0.9, 10, rng), Error);
  }

  TEST_CASE("Monte Carlo acquisition on MVN members") {
    RngStream rng(22);
    const auto inst = battery::make(FamilyKind::mvn, 3);
    for (const auto& in : inst) {
      const McAcquisition a = acquisition_mc(in.tag, in.mean, in.var, in.u, 100000, rng);
      CHECK(rel_gap(acquisition_mvn(2, in.mean, in.var, {}, in.u), a.value) < 0.25);
    }
  }

  TEST_CASE("argmax is invariant to positive rescaling") {
    RngStream rng(23);
    std::vector<double> s(50);
    for (auto& x : s) x = rng.uniform();
    const auto best = std::max_element(s.begin(), s.end()) - s.begin();
    for (auto& x : s) x *= 7.5;
    CHECK(std::max_element(s.begin(), s.end()) - s.begin() == best);
  }

  TEST_CASE("acquisition vanishes at training points of an interpolating bank") {
    DbConfig cfg;
    const ProblemSpec db = make_db_problem(cfg, DbData{1.0, 11.0});
    EcpConfig ec;
    ec.budget = 7;
    ec.phase1 = Phase1Method::laplace;
    RngStream design_rng(24);
    const DesignMatrix design = make_design(db, DesignMethod::support, 7, design_rng);
    const Phase1Result p1 = ecp_phase1(db, ec, design, RngStream(25));
    const EmulatorBank bank = ecp_fit_bank(ec, p1, RngStream(26));
    SeqEcpConfig sc;
    sc.ecp = ec;
    const auto at_train = score_candidates(bank, design.points, sc, RngStream(27));
    Eigen::MatrixXd cands(200, 1);
    RngStream draw(28);
    for (Eigen::Index i = 0; i < cands.rows(); ++i) cands(i, 0) = db.prior.sampler(draw)(0);
    const auto scores = score_candidates(bank, cands, sc, RngStream(27));
    double best = 0;
    for (const auto& a : scores) best = std::max(best, a.value);
    Eigen::MatrixXd far(1, 1);
    far << cfg.mu_gamma + 8 * cfg.sigma_gamma;
    const double far_score = score_candidates(bank, far, sc, RngStream(27))[0].value;
    MESSAGE("training max " << std::max_element(at_train.begin(), at_train.end(), [](auto& a, auto& b) { return a.value < b.value; })->value
                            << ", candidates max " << best << ", far " << far_score);
    for (const auto& a : at_train) {
      CHECK(a.value < best);
      CHECK(a.value < 1e-3 * far_score);
    }
  }

  TEST_CASE("configuration checks") {
    const ProblemSpec db = make_db_problem(DbConfig{}, DbData{1.0, 11.0});
    SeqEcpConfig sc;
    sc.ecp.budget = 10;
    sc.build_budget = 11;
    CHECK_THROWS_AS(sc.validate(db), Error);
    sc.build_budget = 2;
    CHECK_THROWS_AS(sc.validate(db), Error);
    sc.build_budget = 5;
    sc.candidates = 5;
    CHECK_THROWS_AS(sc.validate(db), Error);
    sc.candidates = 500;
    CHECK_NOTHROW(sc.validate(db));
    CHECK(SeqEcpConfig{}.resolved_build(10) == 5);
  }

  TEST_CASE("a full build budget reproduces plain ECP") {
    const ProblemSpec db = make_db_problem(DbConfig{}, DbData{1.0, 11.0});
    SeqEcpConfig sc;
    sc.ecp.budget = 8;
    sc.ecp.samples_per_location = 200;
    sc.ecp.prediction_size = 300;
    sc.build_budget = 8;
    const SeqEcpResult s = sequential_ecp(db, sc, RngStream(28));
    const EcpResult e = ecp_sample(db, sc.ecp, RngStream(28));
    CHECK(s.trace.empty());
    CHECK(s.ecp.training_design.points == e.training_design.points);
    REQUIRE(s.ecp.approximation.size() == e.approximation.size());
    for (std::size_t i = 0; i < e.approximation.size(); ++i)
      CHECK(s.ecp.approximation.mixture().components[i].values == e.approximation.mixture().components[i].values);
  }

  TEST_CASE("sequential rounds extend the design and write a trace") {
    const ProblemSpec db = make_db_problem(DbConfig{}, DbData{1.0, 11.0});
    SeqEcpConfig sc;
    sc.ecp.budget = 9;
    sc.ecp.samples_per_location = 200;
    sc.ecp.prediction_size = 300;
    sc.build_budget = 5;
    const SeqEcpResult s = sequential_ecp(db, sc, RngStream(29));
    CHECK(s.trace.size() == 4);
    CHECK(s.ecp.training_design.points.rows() == 9);
    for (std::size_t k = 0; k < 4; ++k)
      CHECK(s.ecp.training_design.points(static_cast<Eigen::Index>(5 + k), 0) == s.trace[k].gamma(0));
    std::ostringstream os;
    s.write_trace_csv(os);
    const std::string csv = os.str();
    CHECK(csv.rfind("round,gamma1,score,rejections,fallback\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

    sc.ecp.threads = 3;
    const SeqEcpResult t = sequential_ecp(db, sc, RngStream(29));
    CHECK(t.ecp.training_design.points == s.ecp.training_design.points);

    sc.monte_carlo = true;
    sc.mc_draws = 1000;
    sc.candidates = 20;
    const SeqEcpResult mc = sequential_ecp(db, sc, RngStream(30));
    CHECK(mc.trace.size() == 4);
  }

  TEST_CASE("sequential ECP keeps pace with plain ECP") {
    const ProblemSpec db = make_db_problem(DbConfig{}, DbData{1.0, 11.0});
    const FamilyParams cut = db_cut_analytic(DbConfig{}, 1.0, 11.0);
    auto ks = [&](const CutApproximation& a, RngStream rng) {
      const Eigen::MatrixXd d = a.sample(10000, rng);
      std::vector<double> v(d.data(), d.data() + d.size());
      return ks_to_cdf(v, [&](double x) { return cdf(cut, x); }).distance;
    };
    std::vector<double> seq, plain;
    for (std::uint64_t s = 0; s < 25; ++s) {
      RngStream rng(400 + s);
      SeqEcpConfig sc;
      sc.ecp.budget = 10;
      sc.ecp.design = DesignMethod::iid;
      sc.build_budget = 5;
      seq.push_back(ks(sequential_ecp(db, sc, rng.derive("seq")).ecp.approximation, rng.derive("draw")));
      plain.push_back(ks(ecp_sample(db, sc.ecp, rng.derive("plain")).approximation, rng.derive("draw")));
    }
    MESSAGE("median KS sequential " << median(seq) << ", plain " << median(plain));
    CHECK(median(seq) <= 1.5 * median(plain));
  }
}
