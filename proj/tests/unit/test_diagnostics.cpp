#include <doctest.h>

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

#include "cutpost/diagnostics.hpp"
#include "cutpost/error.hpp"
#include "cutpost/families.hpp"
#include "cutpost/rng.hpp"

using namespace cutpost;

namespace {

// O(nm) two-sample distance: evaluate both ECDFs at every pooled point.
double ks_brute(const std::vector<double>& a, const std::vector<double>& b) {
  double best = 0.0;
  auto at = [](const std::vector<double>& s, double x) {
    std::size_t c = 0;
    for (double v : s) c += v <= x;
    return static_cast<double>(c) / static_cast<double>(s.size());
  };
  for (const auto* s : {&a, &b})
    for (double x : *s) best = std::max(best, std::abs(at(a, x) - at(b, x)));
  return best;
}

std::vector<double> draws(RngStream& rng, std::size_t n, double shift) {
  std::vector<double> v(n);
  for (auto& x : v) x = std::round(4.0 * (rng.normal() + shift)) / 4.0;  // ties on purpose
  return v;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("one-sample distance examples") {
  CHECK(ks_to_cdf({0.0}, normal_cdf).distance == doctest::Approx(0.5).epsilon(1e-15));
  const std::size_t n = 40;
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = normal_quantile((static_cast<double>(i) + 0.5) / n);
  CHECK(ks_to_cdf(q, normal_cdf).distance == doctest::Approx(0.5 / n).epsilon(1e-12));
  CHECK_THROWS_AS(ks_to_cdf({0.0, std::nan("")}, normal_cdf), Error);
}

TEST_CASE("one-sample distance on normal draws") {
  RngStream rng(1);
  std::vector<double> s(10000);
  for (auto& x : s) x = rng.normal();
  const auto r = ks_to_cdf(s, normal_cdf);
  CHECK(r.distance < 0.025);
  CHECK(r.n == 10000);
}

TEST_CASE("one-sample distance ignores input order") {
  RngStream rng(2);
  std::vector<double> s(300);
  for (auto& x : s) x = rng.normal(0.3, 1.2);
  const double d = ks_to_cdf(s, normal_cdf).distance;
  std::vector<double> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  CHECK(ks_to_cdf(sorted, normal_cdf).distance == d);
  std::reverse(s.begin(), s.end());
  CHECK(ks_to_cdf(s, normal_cdf).distance == d);
}

TEST_CASE("two-sample distance examples") {
  CHECK(ks_two_sample({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}).distance == 0.0);
  CHECK(ks_two_sample({0.0}, {1.0}).distance == 1.0);
}

TEST_CASE("two-sample distance matches brute force") {
  RngStream rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(60), m = 1 + rng.below(60);
    const auto a = draws(rng, n, 0.0);
    const auto b = draws(rng, m, 0.3 * rng.normal());
    const double fast = ks_two_sample(a, b).distance;
    CHECK(fast == ks_brute(a, b));
    CHECK(ks_two_sample(b, a).distance == fast);
    auto shuffled = a;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(ks_two_sample(shuffled, b).distance == fast);
  }
  const auto a = draws(rng, 37, 0.0), b = draws(rng, 53, 0.5);
  CHECK(ks_two_sample(a, b).distance == ks_brute(a, b));
}

TEST_CASE("empirical cdf") {
  const Ecdf f({3.0, 1.0, 2.0});
  CHECK(f(2.0) == doctest::Approx(2.0 / 3.0));
  CHECK(f(0.5) == 0.0);
  CHECK(f(3.0) == 1.0);
  CHECK(f.size() == 3);
}

TEST_CASE("kernel density integrates to one") {
  using boost::math::quadrature::gauss_kronrod;
  RngStream rng(4);
  std::vector<double> s(500);
  for (auto& x : s) x = rng.uniform() < 0.4 ? rng.normal(-2.0, 0.5) : rng.normal(1.0, 1.0);
  const Kde kde(s);
  const double total = gauss_kronrod<double, 61>::integrate([&](double x) { return kde(x); }, -15.0, 15.0, 15, 1e-12);
  CHECK(std::abs(total - 1.0) < 1e-4);
  const auto grid = kde.evaluate_grid(-3.0, 3.0, 7);
  REQUIRE(grid.size() == 7);
  CHECK(grid[3] == doctest::Approx(kde(0.0)));
}

TEST_CASE("kernel bandwidth") {
  const Kde fixed({0.0, 1.0, 2.0}, 0.37);
  CHECK(fixed.bandwidth() == 0.37);
  RngStream rng(5);
  std::vector<double> s(1000);
  for (auto& x : s) x = rng.normal();
  const Kde auto_bw(s);
  CHECK(auto_bw.bandwidth() == doctest::Approx(silverman_bandwidth(s)));
  CHECK(auto_bw.bandwidth() > 0.2);
  CHECK(auto_bw.bandwidth() < 0.3);
  CHECK_THROWS_AS(Kde(std::vector<double>{2.0, 2.0, 2.0}), Error);
}

TEST_CASE("coverage study under the correct model") {
  const DbConfig cfg = coverage_default_config();
  const auto rows = coverage_study(cfg, CoverageSweep::sigma_star, {1.0}, 5000, 11);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].method == "full");
  CHECK(rows[1].method == "cut");
  for (const auto& r : rows) {
    CHECK(std::abs(r.coverage - 0.95) < 0.02);
    CHECK(r.mse >= 0.0);
    CHECK(r.reps == 5000);
  }
}

TEST_CASE("coverage study is deterministic and thread independent") {
  const DbConfig cfg = coverage_default_config();
  const auto a = coverage_study(cfg, CoverageSweep::sigma_gamma_star, {0.5, 4.0}, 200, 3, 1);
  const auto b = coverage_study(cfg, CoverageSweep::sigma_gamma_star, {0.5, 4.0}, 200, 3, 4);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].coverage == b[i].coverage);
    CHECK(a[i].mse == b[i].mse);
    CHECK(a[i].coverage >= 0.0);
    CHECK(a[i].coverage <= 1.0);
  }
  CHECK_THROWS_AS(coverage_study(cfg, CoverageSweep::sigma_star, {1.0}, 50, 3), Error);
}

}  // TEST_SUITE
