#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "cutpost/diagnostics.hpp"
#include "cutpost/doe.hpp"
#include "cutpost/error.hpp"

using namespace cutpost;

namespace {

std::vector<double> column(const DesignMatrix& d, int c = 0) {
  return std::vector<double>(d.points.col(c).data(), d.points.col(c).data() + d.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const auto kDbCdf = [](double x) { return normal_cdf((x - 10.0) / 0.1); };
const QuantileFn kDbQuantile = [](double u) { return 10.0 + 0.1 * normal_quantile(u); };
const PriorSampler kDbSampler = [](RngStream& r) { return Eigen::VectorXd::Constant(1, r.normal(10.0, 0.1)); };
const LogDensity kDbLogDensity = [](const Eigen::VectorXd& x) { return -0.5 * std::pow((x(0) - 10.0) / 0.1, 2); };

}  // namespace

TEST_SUITE("doe") {

TEST_CASE("iid designs") {
  RngStream rng(1);
  const auto point = iid_design([](RngStream&) { return Eigen::VectorXd::Constant(2, 3.5); }, 5, rng);
  CHECK((point.points.array() == 3.5).all());
  const auto big = iid_design(kDbSampler, 10000, rng);
  CHECK(std::abs(big.points.mean() - 10.0) < 0.004);
  CHECK(big.provenance == "iid");
  CHECK_THROWS_AS(iid_design(kDbSampler, 0, rng), Error);
}

TEST_CASE("latin hypercube stratifies every margin") {
  RngStream rng(2);
  const auto d = lhs_design({[](double u) { return u; }}, 4, rng);
  std::set<int> strata;
  for (double v : column(d)) strata.insert(static_cast<int>(std::floor(v * 4)));
  CHECK(strata.size() == 4);

  const auto two = lhs_design({[](double u) { return u; }, [](double u) { return u; }}, 10, rng);
  for (int c = 0; c < 2; ++c) {
    std::set<int> s;
    for (double v : column(two, c)) s.insert(static_cast<int>(std::floor(v * 10)));
    CHECK(s.size() == 10);
  }
}

TEST_CASE("latin hypercube on a normal margin is close in KS") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    RngStream rng(seed);
    const auto d = lhs_design({[](double u) { return normal_quantile(u); }}, 100, rng);
    worst = std::max(worst, ks_to_cdf(column(d), normal_cdf).distance);
  }
  CHECK(worst < 0.035);
}

TEST_CASE("latin hypercube single point and mapping errors") {
  RngStream rng(3);
  const auto one = lhs_design({[](double u) { return u; }}, 1, rng);
  CHECK(one.size() == 1);
  CHECK(one.points(0, 0) >= 0.0);
  CHECK(one.points(0, 0) < 1.0);
  try {
    lhs_design({[](double u) { return u; }, [](double) { return std::numeric_limits<double>::infinity(); }}, 5, rng);
    FAIL("expected a mapping error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::mapping);
    CHECK(std::string(e.what()).find("margin 1") != std::string::npos);
  }
}

TEST_CASE("one support point of a symmetric pool is its center") {
  RngStream rng(4);
  Eigen::MatrixXd pool(100000, 1);
  for (Eigen::Index i = 0; i < pool.rows(); ++i) pool(i, 0) = rng.normal();
  const auto d = support_points(pool, 1, rng);
  CHECK(std::abs(d.points(0, 0)) < 0.02);
  CHECK(d.monotonicity_violations == 0);
}

TEST_CASE("support points of a pool of size L are the pool") {
  RngStream rng(5);
  Eigen::MatrixXd pool(6, 2);
  pool << 0, 0, 1, 0, 0, 1, 1, 1, 2, 3, -1, 4;
  const auto d = support_points(pool, 6, rng);
  CHECK((d.points - pool).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(support_points(pool, 7, rng), Error);
}

TEST_CASE("support point energy never increases") {
  RngStream rng(6);
  Eigen::MatrixXd pool(3000, 2);
  for (Eigen::Index i = 0; i < pool.rows(); ++i) {
    pool(i, 0) = rng.normal();
    pool(i, 1) = 0.5 * pool(i, 0) + rng.normal();
  }
  const auto d = support_points(pool, 20, rng);
  CHECK(d.monotonicity_violations == 0);
  REQUIRE(d.energy_trace.size() >= 2);
  for (std::size_t i = 1; i < d.energy_trace.size(); ++i)
    CHECK(d.energy_trace[i] <= d.energy_trace[i - 1] * (1 + 1e-10) + 1e-14);
  CHECK(d.energy_trace.back() < d.energy_trace.front());
}

TEST_CASE("projected support points are distinct pool members") {
  RngStream rng(7);
  Eigen::MatrixXd pool(500, 2);
  for (Eigen::Index i = 0; i < pool.rows(); ++i) pool.row(i) << rng.normal(), rng.normal();
  SupportOptions opt;
  opt.project_to_pool = true;
  const auto d = support_points(pool, 25, rng, opt);
  std::set<std::pair<double, double>> seen;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    bool member = false;
    for (Eigen::Index k = 0; k < pool.rows(); ++k)
      if (pool.row(k) == d.points.row(i)) member = true;
    CHECK(member);
    seen.insert({d.points(i, 0), d.points(i, 1)});
  }
  CHECK(seen.size() == 25);
}

TEST_CASE("support points beat typical random designs") {
  std::vector<double> iid_ks;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    RngStream rng(seed, 1);
    iid_ks.push_back(ks_to_cdf(column(iid_design(kDbSampler, 30, rng)), kDbCdf).distance);
  }
  const double iid_median = median(iid_ks);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    RngStream rng(seed, 2);
    const auto sp = support_points(kDbQuantile, 30, rng);
    CHECK(ks_to_cdf(column(sp), kDbCdf).distance < iid_median);
  }
}

TEST_CASE("minimum energy design with one point finds the mode") {
  RngStream rng(8);
  DesignMatrix init;
  init.points = Eigen::MatrixXd::Constant(1, 1, 1.7);
  LogDensity target = [](const Eigen::VectorXd& x) { return -0.5 * x(0) * x(0); };
  const auto d = mined_design(target, 1, init, Bounds::box(Eigen::VectorXd::Constant(1, -5), Eigen::VectorXd::Constant(1, 5)), rng);
  CHECK(std::abs(d.points(0, 0)) < 0.05);
}

TEST_CASE("minimum energy design on a uniform box spreads out") {
  RngStream rng(9);
  DesignMatrix init;
  init.points.resize(4, 1);
  init.points << 0.4, 0.45, 0.5, 0.55;
  LogDensity flat = [](const Eigen::VectorXd&) { return 0.0; };
  const auto bounds = Bounds::box(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
  const auto d = mined_design(flat, 4, init, bounds, rng);
  auto v = column(d);
  std::sort(v.begin(), v.end());
  double gap = 1.0;
  for (std::size_t i = 1; i < v.size(); ++i) gap = std::min(gap, v[i] - v[i - 1]);
  // Best achievable on a 101-point grid is 0.33; the check is loose.
  CHECK(gap > 0.15);
}

TEST_CASE("minimum energy design clips to bounds and checks the init") {
  RngStream rng(10);
  DesignMatrix init;
  init.points.resize(3, 1);
  init.points << -2.0, 0.5, 3.0;
  LogDensity flat = [](const Eigen::VectorXd&) { return 0.0; };
  const auto bounds = Bounds::box(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
  MinedOptions opt;
  opt.sweeps = 50;
  const auto d = mined_design(flat, 3, init, bounds, rng, opt);
  CHECK(d.points.minCoeff() >= 0.0);
  CHECK(d.points.maxCoeff() <= 1.0);

  LogDensity nowhere = [](const Eigen::VectorXd&) { return -std::numeric_limits<double>::infinity(); };
  try {
    mined_design(nowhere, 3, init, bounds, rng, opt);
    FAIL("expected an initialization error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::initialization);
  }
}

TEST_CASE("linear variance inflation") {
  DesignMatrix d;
  d.points.resize(2, 1);
  d.points << -1.0, 1.0;
  d.provenance = "iid";
  const auto out = inflate_variance(d, 0.5, Bounds::unbounded(1), InflationMode::linear);
  CHECK(out.points(0, 0) == doctest::Approx(-1.5));
  CHECK(out.points(1, 0) == doctest::Approx(1.5));
  CHECK(out.provenance == "inflated(iid)");

  RngStream rng(11);
  DesignMatrix e = iid_design(kDbSampler, 50, rng);
  auto sd = [](const Eigen::VectorXd& x) { return std::sqrt((x.array() - x.mean()).square().sum() / (x.size() - 1)); };
  const auto wide = inflate_variance(e, 0.10, Bounds::unbounded(1), InflationMode::linear);
  CHECK(sd(wide.points.col(0)) / sd(e.points.col(0)) == doctest::Approx(1.10).epsilon(1e-12));

  const auto box = Bounds::box(Eigen::VectorXd::Constant(1, -1.2), Eigen::VectorXd::Constant(1, 1.2));
  try {
    inflate_variance(d, 0.5, box, InflationMode::linear);
    FAIL("expected a bounds violation");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::bounds_violation);
  }
}

TEST_CASE("power inflation with omega one reproduces the KDE") {
  RngStream rng(12);
  DesignMatrix d;
  d.points.resize(500, 1);
  for (Eigen::Index i = 0; i < 500; ++i) d.points(i, 0) = rng.normal();
  const auto out = inflate_variance(d, 1.0, Bounds::box(Eigen::VectorXd::Constant(1, -10), Eigen::VectorXd::Constant(1, 10)),
                                    InflationMode::power);
  const auto input = column(d);
  const double h = silverman_bandwidth(input);
  auto kde_cdf = [&](double x) {
    double s = 0;
    for (double v : input) s += normal_cdf((x - v) / h);
    return s / static_cast<double>(input.size());
  };
  CHECK(ks_to_cdf(column(out), kde_cdf).distance < 0.05);
}

TEST_CASE("power inflation widens and keeps ranks") {
  RngStream rng(13);
  DesignMatrix d;
  d.points.resize(200, 2);
  for (Eigen::Index i = 0; i < 200; ++i) {
    d.points(i, 0) = 0.5 + 0.1 * rng.normal();
    d.points(i, 1) = d.points(i, 0) + 0.05 * rng.normal();
  }
  const auto box = Bounds::box(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2));
  const auto out = inflate_variance(d, 0.5, box, InflationMode::power);
  auto sd = [](const Eigen::VectorXd& x) { return std::sqrt((x.array() - x.mean()).square().sum() / (x.size() - 1)); };
  for (int c = 0; c < 2; ++c) {
    CHECK(sd(out.points.col(c)) >= sd(d.points.col(c)));
    CHECK(out.points.col(c).minCoeff() >= 0.0);
    CHECK(out.points.col(c).maxCoeff() <= 1.0);
    for (Eigen::Index i = 1; i < 200; ++i)
      if (d.points(i, c) > d.points(0, c)) CHECK(out.points(i, c) >= out.points(0, c));
  }
}

TEST_CASE("design ordering at thirty points") {
  std::vector<double> ks_iid, ks_lhs, ks_sp, ks_mined;
  const auto bounds = Bounds::unbounded(1);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    RngStream rng(seed, 3);
    ks_iid.push_back(ks_to_cdf(column(iid_design(kDbSampler, 30, rng)), kDbCdf).distance);
    const auto lhs = lhs_design({kDbQuantile}, 30, rng);
    ks_lhs.push_back(ks_to_cdf(column(lhs), kDbCdf).distance);
    ks_sp.push_back(ks_to_cdf(column(support_points(kDbQuantile, 30, rng)), kDbCdf).distance);
    ks_mined.push_back(ks_to_cdf(column(mined_design(kDbLogDensity, 30, lhs, bounds, rng)), kDbCdf).distance);
  }
  MESSAGE("median KS iid=" << median(ks_iid) << " lhs=" << median(ks_lhs) << " sp=" << median(ks_sp)
                           << " mined=" << median(ks_mined));
  CHECK(median(ks_sp) <= median(ks_lhs));
  CHECK(median(ks_lhs) <= median(ks_iid));
  CHECK(median(ks_mined) <= median(ks_iid));
}

TEST_CASE("design csv output") {
  DesignMatrix d;
  d.points.resize(2, 2);
  d.points << 1.0, 0.5, -2.0, 0.25;
  d.provenance = "lhs";
  std::ostringstream os;
  d.write_csv(os, {"a", "b"});
  CHECK(os.str() == "# provenance: lhs\na,b\n1,0.5\n-2,0.25\n");
}

}  // TEST_SUITE
