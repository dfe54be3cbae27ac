#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "tailrisk/distributions.hpp"
#include "tailrisk/errors.hpp"

using namespace tailrisk;
using Catch::Approx;

namespace {

// Composite Simpson on [a, b] with m (even) panels.
template <class F>
double simpson(F f, double a, double b, int m) {
  const double h = (b - a) / m;
  double s = f(a) + f(b);
  for (int i = 1; i < m; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double sorted_quantile_oracle(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  const double pos = p * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace

TEST_CASE("gpd_cdf worked values") {
  CHECK(gpd_cdf(0.0, {1.7, 0.3}) == 0.0);
  CHECK(gpd_cdf(1.0, {1.0, 1e-12}) == Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  CHECK(gpd_cdf(2.0, {2.0, 0.5}) == Approx(5.0 / 9.0).epsilon(1e-14));
  // Integrating the density reproduces the closed form.
  const GpdParams p{2.0, 0.5};
  const double integral = simpson([&](double z) { return std::exp(gpd_logpdf(z, p)); }, 0.0, 2.0, 2000);
  CHECK(integral == Approx(5.0 / 9.0).epsilon(1e-10));
}

TEST_CASE("gpd_cdf rejects arguments outside the support") {
  CHECK_THROWS_AS(gpd_cdf(-0.1, {1.0, 0.2}), DomainError);
  CHECK_THROWS_AS(gpd_cdf(5.1, {1.0, -0.2}), DomainError);
  CHECK_THROWS_AS(gpd_cdf(std::nan(""), {1.0, 0.2}), DomainError);
  CHECK_THROWS_AS(gpd_cdf(1.0, {0.0, 0.2}), DomainError);
  CHECK_THROWS_AS(gpd_cdf(1.0, {1.0, std::numeric_limits<double>::infinity()}), DomainError);
  CHECK(gpd_cdf(5.0, {1.0, -0.2}) == 1.0);
}

TEST_CASE("gpd_quantile worked values and errors") {
  CHECK(gpd_quantile(0.0, {3.0, 0.4}) == 0.0);
  CHECK(gpd_quantile(1.0 - std::exp(-1.0), {1.0, 1e-12}) == Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(gpd_quantile(1.0, {1.0, 0.1}), DomainError);
  CHECK_THROWS_AS(gpd_quantile(-0.01, {1.0, 0.1}), DomainError);
}

TEST_CASE("gpd quantile and cdf round trip") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const GpdParams p{0.1 + 5.0 * rng.uniform(), -0.9 + 1.9 * rng.uniform()};
    const double prob = 0.999 * rng.uniform();
    CHECK(gpd_cdf(gpd_quantile(prob, p), p) == Approx(prob).epsilon(1e-10));
  }
}

TEST_CASE("quantile of cdf is the identity inside the support") {
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const GpdParams p{0.1 + 5.0 * rng.uniform(), -0.9 + 1.9 * rng.uniform()};
    const double x = gpd_quantile(0.9999 * rng.uniform(), p);
    CHECK(gpd_quantile(gpd_cdf(x, p), p) == Approx(x).epsilon(1e-10).margin(1e-12));
  }
}

TEST_CASE("negative shape quantiles stay below the endpoint") {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const GpdParams p{0.1 + 3.0 * rng.uniform(), -0.95 * rng.uniform() - 0.01};
    const double prob = rng.uniform() * (1.0 - 1e-12);
    CHECK(gpd_quantile(prob, p) < gpd_upper_bound(p));
  }
}

TEST_CASE("gpd_cdf is nondecreasing on random grids") {
  Rng rng(14);
  for (int r = 0; r < 50; ++r) {
    const GpdParams p{0.1 + 3.0 * rng.uniform(), -0.8 + 1.6 * rng.uniform()};
    const double hi = p.xi < 0 ? gpd_upper_bound(p) : 30.0 * p.sigma;
    double prev = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double v = gpd_cdf(hi * i / 200.0, p);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("exponential branch is continuous across the switch") {
  for (double x : {0.0, 0.3, 1.0, 4.0, 12.0}) {
    const double a = gpd_cdf(x, {1.3, 0.9 * kXiZeroTol});
    const double b = gpd_cdf(x, {1.3, 1.1 * kXiZeroTol});
    CHECK(a == Approx(b).epsilon(1e-9));
    CHECK(gpd_logpdf(x, {1.3, -1.1 * kXiZeroTol}) == Approx(gpd_logpdf(x, {1.3, 0.0})).epsilon(1e-9).margin(1e-12));
  }
}

TEST_CASE("gpd_loglik worked values") {
  const std::vector<double> zero{0.0};
  CHECK(gpd_loglik(zero, {1.0, 0.0}) == 0.0);
  const std::vector<double> z{1.0, 2.0};
  CHECK(gpd_loglik(z, {1.0, 0.0}) == Approx(-3.0).epsilon(1e-15));
  CHECK_THROWS_AS(gpd_loglik(std::vector<double>{}, {1.0, 0.0}), DomainError);
  const std::vector<double> outside{1.0, 6.0};
  CHECK(gpd_loglik(outside, {1.0, -0.2}) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("log density matches the numerical derivative of the cdf") {
  Rng rng(15);
  for (int i = 0; i < 200; ++i) {
    const GpdParams p{0.2 + 3.0 * rng.uniform(), -0.6 + 1.4 * rng.uniform()};
    const double x = gpd_quantile(0.01 + 0.98 * rng.uniform(), p);
    const double h = 1e-5 * p.sigma;
    // Richardson-extrapolated central difference, O(h^4).
    auto cd = [&](double s) { return (gpd_cdf(x + s, p) - gpd_cdf(x - s, p)) / (2.0 * s); };
    const double dens = (4.0 * cd(h) - cd(2.0 * h)) / 3.0;
    CHECK(gpd_logpdf(x, p) == Approx(std::log(dens)).margin(1e-8));
  }
}

TEST_CASE("log-likelihood gradient matches central differences") {
  Rng rng(16);
  for (int r = 0; r < 50; ++r) {
    GpdParams p{0.5 + 2.0 * rng.uniform(), 0.05 + 0.4 * rng.uniform()};
    if (rng.uniform() < 0.5) p.xi = -p.xi;
    std::vector<double> z(30);
    const double hi = p.xi < 0 ? 0.9 * gpd_upper_bound(p) : 5.0 * p.sigma;
    for (double& v : z) v = hi * rng.uniform();
    const auto g = gpd_loglik_gradient(z, p);
    const double hs = 1e-6 * p.sigma, hx = 1e-6;
    const double fs = (gpd_loglik(z, {p.sigma + hs, p.xi}) - gpd_loglik(z, {p.sigma - hs, p.xi})) / (2 * hs);
    const double fx = (gpd_loglik(z, {p.sigma, p.xi + hx}) - gpd_loglik(z, {p.sigma, p.xi - hx})) / (2 * hx);
    CHECK(g[0] == Approx(fs).epsilon(1e-6).margin(1e-7));
    CHECK(g[1] == Approx(fx).epsilon(1e-6).margin(1e-7));
  }
}

TEST_CASE("normal sample mean") {
  Rng rng(21);
  const std::size_t n = 1000000;
  const auto x = sample(SimFamily::normal(), n, rng);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("standard Gumbel sample median") {
  Rng rng(22);
  const auto x = sample(SimFamily::gumbel(), 1000000, rng);
  CHECK(std::abs(empirical_quantile(x, 0.5) - kGumbelMedian) < 0.01);
  CHECK(kGumbelMedian == Approx(-std::log(std::log(2.0))).epsilon(1e-15));
}

TEST_CASE("Burr sample at its analytic 0.9 quantile") {
  Rng rng(23);
  const auto f = SimFamily::burr(1.0, 2.0);
  const auto x = sample(f, 1000000, rng);
  const double q = family_quantile(f, 0.9);
  // Analytic check of the quantile itself: 1 - (1 + q^c)^-k = 0.9.
  CHECK(1.0 - std::pow(1.0 + q, -2.0) == Approx(0.9).epsilon(1e-12));
  const double ecdf = double(std::count_if(x.begin(), x.end(), [&](double v) { return v <= q; })) / x.size();
  CHECK(std::abs(ecdf - 0.9) < 0.005);
}

TEST_CASE("family quantiles invert family cdfs") {
  for (const auto& f : {SimFamily::frechet(2.0), SimFamily::normal(1.0, 2.0), SimFamily::student_t(4.0),
                        SimFamily::burr(1.5, 2.0), SimFamily::gumbel(0.5, 2.0)}) {
    for (double p : {0.01, 0.3, 0.9, 0.999, 1.0 - 7e-5}) {
      CHECK(family_cdf(f, family_quantile(f, p)) == Approx(p).epsilon(1e-10));
    }
  }
}

TEST_CASE("invalid family parameters are rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(sample(SimFamily::frechet(0.0), 10, rng), DomainError);
  CHECK_THROWS_AS(sample(SimFamily::burr(1.0, -1.0), 10, rng), DomainError);
  CHECK_THROWS_AS(sample(SimFamily::student_t(0.0), 10, rng), DomainError);
  CHECK_THROWS_AS(sample(SimFamily::normal(0.0, 0.0), 10, rng), DomainError);
  CHECK_THROWS_AS(sample(SimFamily::normal(), 0, rng), DomainError);
  CHECK_THROWS_AS(parse_family("cauchy"), DomainError);
}

TEST_CASE("samplers are deterministic given the seed") {
  for (const auto& f : {SimFamily::frechet(2.0), SimFamily::normal(), SimFamily::student_t(4.0),
                        SimFamily::burr(1.0, 2.0), SimFamily::gumbel()}) {
    Rng a(99), b(99);
    CHECK(sample(f, 1000, a) == sample(f, 1000, b));
  }
  Rng a(5), b(5);
  std::vector<double> ga(100), gb(100);
  for (auto& v : ga) v = gpd_sample({1.0, 0.2}, a);
  for (auto& v : gb) v = gpd_sample({1.0, 0.2}, b);
  CHECK(ga == gb);
}

TEST_CASE("forked streams depend only on the seed") {
  Rng a(7);
  const Rng fa = a.fork(3);
  for (int i = 0; i < 10; ++i) a.next_u64();
  Rng fa2 = a.fork(3);
  Rng fa1 = fa;
  CHECK(fa1.next_u64() == fa2.next_u64());
  CHECK(Rng(7).fork(3).seed() != Rng(7).fork(4).seed());
}

TEST_CASE("empirical quantile worked values") {
  const std::vector<double> x{3.0, 1.0, 2.0};
  CHECK(empirical_quantile(x, 0.5) == 2.0);
  std::vector<double> grid(10000);
  std::iota(grid.begin(), grid.end(), 1.0);
  CHECK(std::abs(empirical_quantile(grid, 0.9) - 9000.0) <= 1.0);
  CHECK_THROWS_AS(empirical_quantile(std::vector<double>{}, 0.5), DomainError);
}

TEST_CASE("empirical quantile matches the sort-and-index oracle") {
  Rng rng(31);
  for (int r = 0; r < 100; ++r) {
    std::vector<double> x(1 + rng.index(500));
    for (double& v : x) v = rng.normal();
    const double p = 0.001 + 0.998 * rng.uniform();
    CHECK(empirical_quantile(x, p) == sorted_quantile_oracle(x, p));
  }
}
