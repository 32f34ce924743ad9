#include <doctest.h>

#include <cmath>

#include "cutpost/error.hpp"
#include "cutpost/gp.hpp"
#include "cutpost/problems.hpp"
#include "../common/surface_convergence.hpp"

using namespace cutpost;

namespace {

struct DbSurface {
  DbConfig cfg;
  DbConditionalConstants k;
  DbSurface() {
    const double sum_y = cfg.n1 * 1.0 + cfg.n2 * 11.0;
    k = db_conditional_constants(cfg, sum_y);
  }
  double mean(double g) const { return k.B + k.C * g; }
};

double max_in_hull_error(const GpModel& gp, const DbSurface& s, double lo, double hi) {
  double worst = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double g = lo + (hi - lo) * i / 400.0;
    worst = std::max(worst, std::abs(gp.predict_mean(Eigen::VectorXd(Eigen::VectorXd::Constant(1, g))) - s.mean(g)));
  }
  return worst;
}

}  // namespace

TEST_SUITE("gp") {

TEST_CASE("constant targets give a constant emulator") {
  Eigen::MatrixXd X(5, 2);
  X << 0, 0, 1, 0, 0, 1, 1, 1, 0.5, 0.3;
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(5, 3.25);
  const auto gp = gp_fit(X, y);
  Eigen::MatrixXd Xn(3, 2);
  Xn << 0.2, 0.2, 5, -3, 0.9, 0.1;
  const auto pred = gp.predict(Xn);
  for (int i = 0; i < 3; ++i) {
    CHECK(pred.mean(i) == doctest::Approx(3.25).epsilon(1e-14));
    CHECK(pred.sd(i) <= 1e-6 * (1 + 3.25));
  }
}

TEST_CASE("linear conditional mean is reproduced in the hull") {
  DbSurface s;
  Eigen::MatrixXd X(7, 1);
  Eigen::VectorXd y(7);
  for (int i = 0; i < 7; ++i) {
    X(i, 0) = 9.7 + 0.1 * i;
    y(i) = s.mean(X(i, 0));
  }
  const auto gp = gp_fit(X, y);
  const double range = y.maxCoeff() - y.minCoeff();
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double g = 9.7 + 0.6 * (i + 0.5) / 100.0;
    worst = std::max(worst, std::abs(gp.predict_mean(Eigen::VectorXd(Eigen::VectorXd::Constant(1, g))) - s.mean(g)));
  }
  CHECK(worst < 1e-4 * range);
}

TEST_CASE("at least three training points") {
  Eigen::MatrixXd X(2, 1);
  X << 0, 1;
  try {
    gp_fit(X, Eigen::Vector2d(1, 2));
    FAIL("expected an argument error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::argument);
  }
}

TEST_CASE("duplicate inputs are refused") {
  Eigen::MatrixXd X(4, 1);
  X << 0, 1, 2, 1;
  try {
    gp_fit(X, Eigen::Vector4d(1, 2, 3, 4));
    FAIL("expected a duplicate-design error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::duplicate_design);
  }
}

TEST_CASE("interpolation at training points") {
  RngStream rng(21);
  Eigen::MatrixXd X(25, 2);
  Eigen::VectorXd y(25);
  for (int i = 0; i < 25; ++i) {
    X(i, 0) = rng.uniform();
    X(i, 1) = rng.uniform();
    y(i) = std::sin(3 * X(i, 0)) + X(i, 1) * X(i, 1) + 10.0;
  }
  const auto gp = gp_fit(X, y);
  const auto pred = gp.predict(X);
  const double signal_sd = std::sqrt(gp.signal_variance());
  for (int i = 0; i < 25; ++i) {
    CHECK(std::abs(pred.mean(i) - y(i)) < 1e-6 * (1 + std::abs(y(i))));
    CHECK(pred.sd(i) < 1e-4 * signal_sd);
    CHECK_FALSE(pred.extrapolated[static_cast<std::size_t>(i)]);
  }
  // positive away from the data
  Eigen::MatrixXd off(1, 2);
  off << 0.5013, 0.4987;
  CHECK(gp.predict(off).sd(0) >= 0.0);
}

TEST_CASE("far extrapolation decays to the prior") {
  RngStream rng(22);
  Eigen::MatrixXd X(10, 1);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    X(i, 0) = i / 9.0;
    y(i) = std::sin(6 * X(i, 0)) + 0.1 * rng.normal();
  }
  const auto gp = gp_fit(X, y);
  Eigen::MatrixXd far(1, 1);
  far << 11.0;
  const auto pred = gp.predict(far);
  CHECK(pred.extrapolated[0]);
  CHECK(pred.mean(0) == doctest::Approx(gp.target_mean()).epsilon(1e-12));
  CHECK(std::abs(pred.sd(0) / std::sqrt(gp.signal_variance()) - 1.0) < 0.01);
}

TEST_CASE("diamond surfaces over a grid of designs") {
  DbSurface s;
  Eigen::MatrixXd X(7, 1);
  Eigen::VectorXd y(7);
  for (int i = 0; i < 7; ++i) {
    X(i, 0) = 9.6 + 0.8 * i / 6.0;
    y(i) = s.mean(X(i, 0));
  }
  const auto gp = gp_fit(X, y);
  CHECK(max_in_hull_error(gp, s, 9.6, 10.4) < 1e-3 * std::abs(s.k.C) * 0.8);
}

TEST_CASE("exact diamond surfaces are reproduced at any budget") {
  // The conditional mean is linear in gamma: both budgets reach rounding level.
  DbSurface s;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(seed, 31);
    for (int L : {5, 20}) {
      Eigen::MatrixXd X(L, 1);
      Eigen::VectorXd y(L);
      for (int i = 0; i < L; ++i) {
        X(i, 0) = rng.normal(10.0, 0.1);
        y(i) = s.mean(X(i, 0));
      }
      CHECK(max_in_hull_error(gp_fit(X, y), s, X.minCoeff(), X.maxCoeff()) < 1e-8);
    }
  }
}

TEST_CASE("more training points shrink the error on estimated surfaces") {
  using convergence::median;
  const auto errors = convergence::estimated_surface_errors(20);
  CHECK(median(errors.mean_large) < median(errors.mean_small));
  CHECK(median(errors.log_sd_large) < median(errors.log_sd_small));
}

TEST_CASE("noise-estimating mode accepts duplicated inputs") {
  RngStream rng(23);
  Eigen::MatrixXd X(40, 1);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) {
    X(i, 0) = (i % 8) / 7.0;
    y(i) = 2.0 * X(i, 0) + 0.05 * rng.normal();
  }
  GpOptions opt;
  opt.estimate_noise = true;
  const auto gp = gp_fit(X, y, opt);
  CHECK(gp.nugget() > 1e-6);
  CHECK(std::abs(gp.predict_mean(Eigen::VectorXd(Eigen::VectorXd::Constant(1, 0.5))) - 1.0) < 0.05);
}

TEST_CASE("model summary") {
  Eigen::MatrixXd X(4, 1);
  X << 0, 1, 2, 3;
  const auto gp = gp_fit(X, Eigen::Vector4d(0, 1, 0, 1));
  const std::string js = gp.to_json();
  CHECK(js.find("\"lengthscales\"") != std::string::npos);
  CHECK(js.find("\"design_hash\"") != std::string::npos);
  CHECK(gp.design_hash() == gp_fit(X, Eigen::Vector4d(0, 1, 0, 1)).design_hash());
}

TEST_CASE("nearest positive semi-definite matrix") {
  Eigen::Matrix2d psd;
  psd << 2.0, 0.5, 0.5, 1.0;
  CHECK((nearest_psd(psd) - psd).norm() < 1e-12);

  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  const Eigen::MatrixXd fixed = nearest_psd(bad);
  CHECK((fixed - Eigen::Matrix2d::Constant(1.5)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((nearest_psd(fixed) - fixed).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::Matrix2d clip;
  clip << 1, 0, 0, -1e-6;
  const Eigen::MatrixXd c = nearest_psd(clip);
  CHECK(c(0, 0) == doctest::Approx(1.0));
  CHECK(std::abs(c(1, 1)) < 1e-15);

  RngStream rng(24);
  for (int t = 0; t < 50; ++t) {
    Eigen::MatrixXd M(4, 4);
    for (int i = 0; i < 16; ++i) M(i) = rng.normal();
    const Eigen::MatrixXd P = nearest_psd(M);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    CHECK((nearest_psd(P) - P).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(is_psd(P, 1e-10));
  }
  Eigen::Matrix2d nan = Eigen::Matrix2d::Zero();
  nan(0, 1) = std::nan("");
  CHECK_THROWS_AS(nearest_psd(nan), Error);
}

}  // TEST_SUITE
