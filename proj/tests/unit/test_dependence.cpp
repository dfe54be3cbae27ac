#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tailrisk/dependence.hpp"
#include "tailrisk/distributions.hpp"
#include "tailrisk/errors.hpp"

using namespace tailrisk;
using Catch::Approx;

namespace {

std::vector<double> normals(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
  return {m.col(j).data(), m.col(j).data() + m.rows()};
}

double oracle_gumbel_quantile(double p) { return -std::log(-std::log(p)); }
double oracle_gumbel_survival(double y) { return -std::expm1(-std::exp(-y)); }

double min_eigenvalue(const Eigen::MatrixXd& a) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().minCoeff();
}

}  // namespace

// ---------------------------------------------------------------- ranks and coefficients

TEST_CASE("empirical ranks average ties") {
  const std::vector<double> x{3.0, 1.0, 3.0, 2.0};
  const auto r = empirical_cdf_ranks(x);
  CHECK(r == std::vector<double>{3.5 / 5, 1.0 / 5, 3.5 / 5, 2.0 / 5});
}

TEST_CASE("recommended threshold probability") {
  CHECK(recommended_u(21000) == Approx(0.995));
  CHECK(recommended_u(100) == 0.9);
  CHECK(recommended_u(2100) == Approx(0.95));
}

TEST_CASE("comonotone pairs give chi = chibar = 1 exactly") {
  Rng rng(1);
  const auto x = normals(5000, rng);
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return 2.0 * v + 1.0; });
  for (double u : {0.9, 0.95, 0.99}) {
    CHECK(chi_u(x, x, u) == 1.0);
    CHECK(chi_u(x, y, u) == 1.0);
    CHECK(chibar_u(x, y, u) == 1.0);
  }
}

TEST_CASE("independent pairs: chi near 1 - u, chibar near 0") {
  Rng rng(2);
  const std::size_t n = 100000;
  const auto x = normals(n, rng), y = normals(n, rng);
  for (double u : {0.9, 0.95, 0.99}) {
    const double q = 1.0 - u;
    const double se = std::sqrt(q * q * (1.0 - q * q) / double(n)) / q;
    CHECK(std::abs(chi_u(x, y, u) - q) < 3.0 * se);
  }
  CHECK(std::abs(chibar_u(x, y, 0.95)) < 0.05);
}

TEST_CASE("coefficients depend on ranks only") {
  Rng rng(3);
  const auto x = normals(4000, rng);
  auto y = normals(4000, rng);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.8 * x[i];
  std::vector<double> ex(x.size()), ey(y.size());
  std::transform(x.begin(), x.end(), ex.begin(), [](double v) { return std::exp(v); });
  std::transform(y.begin(), y.end(), ey.begin(), [](double v) { return std::exp(v); });
  CHECK(chi_u(x, y, 0.95) == chi_u(ex, ey, 0.95));
  CHECK(chibar_u(x, y, 0.95) == chibar_u(ex, ey, 0.95));
}

TEST_CASE("coefficient errors") {
  Rng rng(4);
  const auto x = normals(1000, rng);
  std::vector<double> neg(x.size());
  std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
  CHECK_THROWS_AS(chibar_u(x, neg, 0.9), NoJointExceedance);
  CHECK(chi_u(x, neg, 0.9) == 0.0);
  const std::vector<double> flat(1000, 1.0);
  CHECK_THROWS_AS(chi_u(x, flat, 0.9), EstimationError);
  CHECK_THROWS_AS(chi_u(x, x, 0.995), DomainError);  // (1 - u) n = 5
  CHECK_THROWS_AS(chi_u(x, x, 1.0), DomainError);
  CHECK_THROWS_AS(chi_u(x, std::vector<double>(999, 0.0), 0.9), DomainError);
}

TEST_CASE("chibar matrix: comonotone and independent cases") {
  Rng rng(5);
  Eigen::MatrixXd two(3000, 2);
  for (Eigen::Index i = 0; i < 3000; ++i) {
    two(i, 0) = rng.normal();
    two(i, 1) = std::exp(two(i, 0));
  }
  const auto c = chibar_matrix(two, 0.95);
  CHECK(c.chibar == Eigen::MatrixXd::Ones(2, 2));
  CHECK(c.chi == Eigen::MatrixXd::Ones(2, 2));

  Eigen::MatrixXd three(100000, 3);
  for (auto& v : three.reshaped()) v = rng.normal();
  const auto d = chibar_matrix(three, 0.95);
  CHECK(d.chibar == d.chibar.transpose());
  CHECK(d.chi == d.chi.transpose());
  CHECK((d.chibar - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.05);
  CHECK(d.joint_counts.size() == 9);
  CHECK(d.joint_counts[0] == 5000);
}

TEST_CASE("chibar matrix names the failing pair") {
  Eigen::MatrixXd m(1000, 3);
  Rng rng(6);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    m(i, 0) = rng.normal();
    m(i, 1) = rng.normal();
    m(i, 2) = -m(i, 0);
  }
  CHECK_THROWS_WITH(chibar_matrix(m, 0.9), Catch::Matchers::ContainsSubstring("pair"));
  CHECK_THROWS_AS(chibar_matrix(m.leftCols(1), 0.9), DomainError);
}

namespace {

// P(X > z, Y > z) for a standard bivariate normal with correlation rho, by
// Simpson's rule over x in [z, z + 12].
double normal_orthant(double z, double rho) {
  const double s = std::sqrt(1.0 - rho * rho);
  auto f = [&](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI) * 0.5 * std::erfc((z - rho * x) / s / std::sqrt(2.0));
  };
  const int m = 20000;
  const double h = 12.0 / m;
  double acc = f(z) + f(z + 12.0);
  for (int i = 1; i < m; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(z + i * h);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("Gaussian copula: chibar matches its pre-asymptotic population value") {
  const double u = 0.995;
  const double z = 2.5758293035489004;  // Phi^-1(0.995)
  for (double rho : {0.3, 0.6}) {
    Eigen::Matrix2d r;
    r << 1.0, rho, rho, 1.0;
    const auto model = GaussianCopulaModel::from_correlation(r);
    Rng rng(7);
    const Eigen::MatrixXd g = sample_gaussian_copula(model, 1000000, rng);
    const double population = 2.0 * std::log(1.0 - u) / std::log(normal_orthant(z, rho)) - 1.0;
    // At u = 0.995 the population value is still well below its limit rho.
    CHECK(population < rho - 0.05);
    CHECK(std::abs(chibar_u(column(g, 0), column(g, 1), u) - population) < 0.03);
  }
}

// ---------------------------------------------------------------- nearest correlation matrix

TEST_CASE("nearest_psd leaves PSD input untouched") {
  Eigen::Matrix3d a;
  a << 1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0;
  const auto r = nearest_psd(a);
  CHECK_FALSE(r.projected);
  CHECK(r.matrix == Eigen::MatrixXd(a));
}

TEST_CASE("nearest_psd on the indefinite 3x3 example") {
  Eigen::Matrix3d a;
  a << 1.0, 0.9, 0.9, 0.9, 1.0, -0.9, 0.9, -0.9, 1.0;
  REQUIRE(min_eigenvalue(a) < 0.0);
  const auto r = nearest_psd(a);
  CHECK(r.projected);
  CHECK(min_eigenvalue(r.matrix) >= -1e-10);
  CHECK((r.matrix.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
  const double dist = (r.matrix - a).norm();

  // Clipped-eigenvalue candidate rescaled to unit diagonal.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(a);
  const Eigen::Matrix3d clipped =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
  const Eigen::Vector3d s = clipped.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::Matrix3d candidate = s.asDiagonal() * clipped * s.asDiagonal();
  CHECK(dist <= (candidate - a).norm() + 1e-9);

  // The problem is symmetric under swapping sites 2 and 3 with a sign flip,
  // so the optimum has the form [[1, b, b], [b, 1, c], [b, c, 1]].
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 2000; ++i) {
    for (int j = 0; j <= 2000; ++j) {
      const double b = -1.0 + i / 1000.0, c = -1.0 + j / 1000.0;
      // PSD iff 1 - c >= 0 and 1 + c - 2 b^2 >= 0.
      if (1.0 + c - 2.0 * b * b < 0.0) continue;
      const double d2 = 2 * (b - 0.9) * (b - 0.9) * 2 + 2 * (c + 0.9) * (c + 0.9);
      best = std::min(best, std::sqrt(d2));
    }
  }
  CHECK(dist <= best + 1e-3);
}

TEST_CASE("nearest_psd on random indefinite matrices") {
  Rng rng(8);
  int indefinite = 0;
  for (int r = 0; r < 100; ++r) {
    const Eigen::Index d = 3 + Eigen::Index(rng.index(6));
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i + 1; j < d; ++j) a(i, j) = a(j, i) = -1.0 + 2.0 * rng.uniform();
    if (min_eigenvalue(a) >= 0.0) continue;
    ++indefinite;
    const auto p = nearest_psd(a);
    CHECK(min_eigenvalue(p.matrix) >= -1e-10);
    CHECK((p.matrix.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((nearest_psd(p.matrix).matrix - p.matrix).cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK(indefinite > 50);
}

TEST_CASE("nearest_psd rejects malformed input") {
  Eigen::Matrix2d a;
  a << 1.0, 0.5, 0.4, 1.0;
  CHECK_THROWS_AS(nearest_psd(a), DomainError);
  a << 2.0, 0.5, 0.5, 1.0;
  CHECK_THROWS_AS(nearest_psd(a), DomainError);
}

TEST_CASE("semidefinite Cholesky of a rank-deficient matrix") {
  Eigen::Matrix3d a;
  a << 1.0, 1.0, 0.5, 1.0, 1.0, 0.5, 0.5, 0.5, 1.0;
  const Eigen::MatrixXd l = semidefinite_cholesky(a);
  CHECK((l * l.transpose() - a).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero(0.0));
  Eigen::Matrix2d bad;
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(semidefinite_cholesky(bad), DomainError);
  CHECK_THROWS_AS(GaussianCopulaModel::from_correlation(bad), DomainError);
}

// ---------------------------------------------------------------- copula Monte Carlo

TEST_CASE("Gumbel and normal scales round trip") {
  for (double t : {-3.0, -1.0, 0.0, 2.0, 6.0, 15.0, 30.0}) {
    CHECK(normal_to_gumbel(gumbel_to_normal(t)) == Approx(t).epsilon(1e-10).margin(1e-12));
  }
  CHECK(gumbel_to_normal(oracle_gumbel_quantile(0.5)) == Approx(0.0).margin(1e-14));
  // Upper tail: P(Z > z) equals the Gumbel survival at t.
  const double z = gumbel_to_normal(20.0);
  CHECK(0.5 * std::erfc(z / std::sqrt(2.0)) == Approx(oracle_gumbel_survival(20.0)).epsilon(1e-10));
}

TEST_CASE("copula Monte Carlo: independence product") {
  const auto model = GaussianCopulaModel::from_correlation(Eigen::MatrixXd::Identity(3, 3));
  const double t = oracle_gumbel_quantile(0.9);
  const std::vector<double> th(3, t);
  const auto e = copula_joint_tail(model, th, 1000000, 42);
  CHECK(e.draws == 1000000);
  CHECK(std::abs(e.p - 1e-3) < 3.0 * e.se);
  CHECK(e.se == Approx(std::sqrt(e.p * (1.0 - e.p) / 1e6)));
}

TEST_CASE("copula Monte Carlo: one dimension at the median") {
  const auto model = GaussianCopulaModel::from_correlation(Eigen::MatrixXd::Identity(1, 1));
  const std::vector<double> th{oracle_gumbel_quantile(0.5)};
  const auto e = copula_joint_tail(model, th, 200000, 43);
  CHECK(std::abs(e.p - 0.5) < 3.0 * e.se);
}

TEST_CASE("copula Monte Carlo: deterministic and monotone in each threshold") {
  Eigen::Matrix3d r;
  r << 1.0, 0.5, 0.3, 0.5, 1.0, 0.4, 0.3, 0.4, 1.0;
  const auto model = GaussianCopulaModel::from_correlation(r);
  std::vector<double> th{1.0, 1.5, 2.0};
  const auto base = copula_joint_tail(model, th, 200000, 44);
  CHECK(copula_joint_tail(model, th, 200000, 44).hits == base.hits);
  for (std::size_t k = 0; k < 3; ++k) {
    auto up = th;
    up[k] += 0.5;
    CHECK(copula_joint_tail(model, up, 200000, 44).hits <= base.hits);
  }
  CHECK_THROWS_AS(copula_joint_tail(model, th, 1000, 44), DomainError);
  CHECK_THROWS_AS(copula_joint_tail(model, std::vector<double>{1.0}, 200000, 44), DomainError);
}

// ---------------------------------------------------------------- p2

namespace {

Eigen::MatrixXd independent_gumbel(std::size_t n, Rng& rng) {
  Eigen::MatrixXd m(n, 3);
  for (auto& v : m.reshaped()) v = -std::log(rng.exponential());
  return m;
}

}  // namespace

TEST_CASE("estimate_p2 at the threshold is half the exceedance probability") {
  Rng rng(9);
  const auto m = independent_gumbel(21000, rng);
  const auto y1 = column(m, 0), y2 = column(m, 1), y3 = column(m, 2);
  const auto probe = estimate_p2(y1, y2, y3, 100.0);
  const auto e = estimate_p2(y1, y2, y3, probe.threshold);
  CHECK(e.p == Approx(0.5 * 0.05).epsilon(1e-14));
  CHECK_THROWS_AS(estimate_p2(y1, y2, y3, probe.threshold - 0.1), DomainError);
  CHECK(probe.p >= 0.0);
  CHECK(probe.p <= 0.5 * 0.05);
  CHECK(e.n_conditional > 9000);
  CHECK(e.n_conditional < 12000);
}

TEST_CASE("estimate_p2 on independent Gumbel data") {
  Rng rng(10);
  const auto m = independent_gumbel(21000, rng);
  const double level = oracle_gumbel_quantile(0.999);
  const auto e = estimate_p2(column(m, 0), column(m, 1), column(m, 2), level);
  // Truth 0.5 * 0.001^2; the estimate extrapolates by more than four orders of magnitude.
  CHECK(std::abs(std::log10(e.p / 5e-7)) < 0.5);
  CHECK_FALSE(e.stability.empty());
}

TEST_CASE("estimate_p2 needs enough conditional exceedances") {
  Rng rng(11);
  const auto m = independent_gumbel(500, rng);
  CHECK_THROWS_AS(estimate_p2(column(m, 0), column(m, 1), column(m, 2), 5.0), EstimationError);
}

// ---------------------------------------------------------------- curves and subsets

TEST_CASE("p1 curve: empirical tracks the independence product and is nonincreasing") {
  Rng rng(12);
  const auto m = independent_gumbel(200000, rng);
  const auto model = GaussianCopulaModel::from_correlation(Eigen::MatrixXd::Identity(3, 3));
  const std::vector<double> grid{-1.0, -0.5, 0.0, 0.5, 1.0, 1.5};
  const auto c = p1_curve(m, model, grid, 200000, 5);
  REQUIRE(c.size() == grid.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double truth = std::pow(oracle_gumbel_survival(grid[i]), 3);
    CHECK(std::abs(c[i].empirical - truth) < 3.0 * std::sqrt(truth * (1 - truth) / 200000.0));
    CHECK(std::abs(c[i].model - truth) < 3.0 * c[i].model_se + 1e-12);
    if (i > 0) CHECK(c[i].empirical <= c[i - 1].empirical);
  }
}

TEST_CASE("p2 curve: empirical nonincreasing and model equal to it below the threshold") {
  Rng rng(13);
  const auto m = independent_gumbel(21000, rng);
  const std::vector<double> grid{-1.0, 0.0, 0.5, 2.0, 3.0, 4.0};
  const auto c = p2_curve(column(m, 0), column(m, 1), column(m, 2), grid);
  REQUIRE(c.size() == grid.size());
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i].empirical <= c[i - 1].empirical);
  // The model uses the conditional frequency times one half; the joint
  // frequency uses the observed share of rows with y3 < m instead.
  CHECK(std::abs(c[0].model - c[0].empirical) < 3.0 * std::sqrt(0.25 / 21000.0));
}

TEST_CASE("quantile bins split 30/40/30") {
  std::vector<double> cov(100);
  for (std::size_t i = 0; i < 100; ++i) cov[i] = double((i * 37) % 100);
  cov.push_back(std::numeric_limits<double>::quiet_NaN());
  const std::vector<double> cuts{0.3, 0.7};
  const auto bins = quantile_bins(cov, cuts);
  REQUIRE(bins.size() == 3);
  CHECK(bins[0].size() == 30);
  CHECK(bins[1].size() == 40);
  CHECK(bins[2].size() == 30);
  for (auto r : bins[0]) CHECK(cov[r] < 30.0);
  const std::vector<double> bad{0.7, 0.3};
  CHECK_THROWS_AS(quantile_bins(cov, bad), DomainError);
}

TEST_CASE("row selection helpers") {
  const std::vector<double> season{1, 2, 2, 1, 2};
  CHECK(rows_equal(season, 2.0) == std::vector<std::size_t>{1, 2, 4});
  Eigen::MatrixXd m(5, 2);
  m << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  const std::vector<std::size_t> rows{0, 3};
  const Eigen::MatrixXd t = take_rows(m, rows);
  CHECK(t.rows() == 2);
  CHECK(t(1, 1) == 8.0);
}
