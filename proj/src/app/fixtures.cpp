#include "tailrisk/app/fixtures.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tailrisk/dependence.hpp"
#include "tailrisk/errors.hpp"

namespace tailrisk::fixtures {

std::string c1_variant_name(C1Variant v) {
  switch (v) {
    case C1Variant::Homogeneous: return "homogeneous";
    case C1Variant::Location: return "location";
    case C1Variant::Scale: return "scale";
  }
  return "?";
}

C1Variant parse_c1_variant(const std::string& s) {
  if (s == "homogeneous") return C1Variant::Homogeneous;
  if (s == "location") return C1Variant::Location;
  if (s == "scale") return C1Variant::Scale;
  throw ConfigError("c1 variant must be homogeneous, location or scale, got '" + s + "'");
}

C1Truth c1_truth(const C1Options& o, std::span<const double> x) {
  const double x1 = x.empty() ? 0.0 : x[0];
  C1Truth t{0.0, o.sigma0, o.xi};
  if (o.variant == C1Variant::Location) t.mu = 2.0 * x1;
  if (o.variant == C1Variant::Scale) t.sigma = o.sigma0 * (1.0 + std::abs(x1));
  return t;
}

double c1_true_quantile(const C1Options& o, std::span<const double> x, double tau) {
  const C1Truth t = c1_truth(o, x);
  return t.mu + gpd_quantile(tau, {t.sigma, t.xi});
}

C1Fixture make_c1(const C1Options& o, Rng& rng) {
  if (o.p < 1) throw ConfigError("c1 fixture needs p >= 1");
  if (o.n < 1 || o.n_test < 1) throw ConfigError("c1 fixture needs n >= 1 and n_test >= 1");
  if (!(o.sigma0 > 0.0)) throw ConfigError("sigma0 must be positive");
  if (!(o.xi > -0.5 && o.xi < 1.0)) throw ConfigError("xi must lie in (-0.5, 1)");
  if (!(o.missing_rate >= 0.0 && o.missing_rate < 1.0)) throw ConfigError("missing_rate must lie in [0, 1)");
  if (!(o.tau > 0.0 && o.tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");

  Rng data_rng = rng.fork(1);
  Rng test_rng = rng.fork(2);
  Rng miss_rng = rng.fork(3);

  auto draw = [&](Rng& r, std::size_t rows, Table& t, bool response) {
    std::vector<std::vector<double>> x(o.p, std::vector<double>(rows));
    std::vector<double> dir(rows), y(rows);
    std::vector<double> xi(o.p);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < o.p; ++j) xi[j] = x[j][i] = r.normal();
      if (o.angle) dir[i] = 360.0 * r.uniform();
      if (response) {
        const C1Truth tr = c1_truth(o, xi);
        y[i] = tr.mu + gpd_sample({tr.sigma, tr.xi}, r);
      }
    }
    for (std::size_t j = 0; j < o.p; ++j) t.add("X" + std::to_string(j + 1), std::move(x[j]));
    if (o.angle) t.add("dir", std::move(dir));
    if (response) t.add("Y", std::move(y));
  };

  C1Fixture f;
  draw(data_rng, o.n, f.train, true);
  draw(test_rng, o.n_test, f.test, false);

  for (std::size_t i = 0; i < o.n; ++i) {
    if (miss_rng.uniform() < o.missing_rate) {
      const std::size_t covariates = o.p + (o.angle ? 1 : 0);
      f.train.columns[miss_rng.index(covariates)][i] = std::numeric_limits<double>::quiet_NaN();
      ++f.rows_with_missing;
    }
  }

  std::vector<double> mu(o.n_test), sigma(o.n_test), xi(o.n_test), q(o.n_test);
  std::vector<double> x(o.p);
  for (std::size_t i = 0; i < o.n_test; ++i) {
    for (std::size_t j = 0; j < o.p; ++j) x[j] = f.test.columns[j][i];
    const C1Truth t = c1_truth(o, x);
    mu[i] = t.mu;
    sigma[i] = t.sigma;
    xi[i] = t.xi;
    q[i] = c1_true_quantile(o, x, o.tau);
  }
  f.truth.add("mu", std::move(mu));
  f.truth.add("sigma", std::move(sigma));
  f.truth.add("xi", std::move(xi));
  f.truth.add("q", std::move(q));
  return f;
}

// ---------------------------------------------------------------- c3

namespace {

double normal_pdf(double w) { return std::exp(-0.5 * w * w) / std::sqrt(2.0 * std::numbers::pi); }

template <class F>
double integrate_factor(F&& f) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  return gauss_kronrod<double, 61>::integrate(f, -12.0, 12.0, 15, 1e-12, &err);
}

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1)");
}

}  // namespace

double c3_p1_truth(double rho, std::span<const double> thresholds) {
  check_rho(rho);
  std::vector<double> z;
  for (double t : thresholds) z.push_back(gumbel_to_normal(t));
  const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
  return integrate_factor([&](double w) {
    double v = normal_pdf(w);
    for (double zi : z) v *= normal_survival((zi - a * w) / b);
    return v;
  });
}

double c3_p2_truth(double rho, double y) {
  check_rho(rho);
  const double z = gumbel_to_normal(y);
  const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
  return integrate_factor([&](double w) {
    const double s = normal_survival((z - a * w) / b);
    return normal_pdf(w) * s * s * normal_cdf(-a * w / b);
  });
}

Table make_c3(const C3Options& o, Rng& rng) {
  check_rho(o.rho);
  if (o.n < 1) throw ConfigError("c3 fixture needs n >= 1");
  Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(3, 3, o.rho);
  corr.diagonal().setOnes();
  const auto model = GaussianCopulaModel::from_correlation(corr);
  Rng sample_rng = rng.fork(1);
  const Eigen::MatrixXd y = sample_gaussian_copula(model, o.n, sample_rng);
  Table t;
  for (Eigen::Index j = 0; j < 3; ++j) t.add("Y" + std::to_string(j + 1), {y.col(j).data(), y.col(j).data() + y.rows()});
  if (o.covariates) {
    Rng cov_rng = rng.fork(2);
    std::vector<double> season(o.n), atmosphere(o.n);
    for (std::size_t i = 0; i < o.n; ++i) {
      season[i] = cov_rng.uniform() < 0.5 ? 1.0 : 2.0;
      atmosphere[i] = cov_rng.normal();
    }
    t.add("season", std::move(season));
    t.add("atmosphere", std::move(atmosphere));
  }
  return t;
}

// ---------------------------------------------------------------- c4

double logistic_joint_survival(double alpha, std::span<const double> s) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("logistic alpha must lie in (0, 1]");
  const std::size_t d = s.size();
  if (d == 0 || d > 24) throw DomainError("logistic_joint_survival supports 1 to 24 sites");
  std::vector<double> e(d);
  for (std::size_t i = 0; i < d; ++i) e[i] = std::exp(-s[i] / alpha);
  // sum_{S nonempty} (-1)^|S| expm1(-V_S), V_S = (sum_{i in S} e_i)^alpha.
  double total = 0.0;
  const std::uint32_t subsets = 1u << d;
  for (std::uint32_t m = 1; m < subsets; ++m) {
    double sum = 0.0;
    int bits = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (m & (1u << i)) {
        sum += e[i];
        ++bits;
      }
    }
    const double term = std::expm1(-std::pow(sum, alpha));
    total += (bits % 2 ? -term : term);
  }
  return total;
}

void sample_logistic_block(double alpha, Rng& rng, std::span<double> out) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("logistic alpha must lie in (0, 1]");
  if (alpha == 1.0) {
    for (double& v : out) v = -std::log(rng.exponential());
    return;
  }
  const double u = std::numbers::pi * rng.uniform();
  const double e = rng.exponential();
  const double zeta = std::pow(std::pow(std::sin(alpha * u), alpha) * std::pow(std::sin((1.0 - alpha) * u), 1.0 - alpha) /
                                   std::sin(u),
                               1.0 / (1.0 - alpha));
  const double log_s = (1.0 - alpha) / alpha * (std::log(zeta) - std::log(e));
  for (double& v : out) v = alpha * (log_s - std::log(rng.exponential()));
}

double c4_truth(const C4Options& o, const ThresholdSpec& spec, std::vector<double>* per_block) {
  double p = 1.0;
  if (per_block) per_block->clear();
  std::vector<double> s(o.block_size);
  for (std::size_t b = 0; b < o.alpha.size(); ++b) {
    for (std::size_t i = 0; i < o.block_size; ++i) s[i] = spec.at(b * o.block_size + i);
    const double pb = logistic_joint_survival(o.alpha[b], s);
    if (per_block) per_block->push_back(pb);
    p *= pb;
  }
  return p;
}

C4Fixture make_c4(const C4Options& o, Rng& rng) {
  if (o.alpha.empty() || o.block_size < 1 || o.block_size > 24) throw ConfigError("c4 fixture needs blocks of 1 to 24 sites");
  if (o.n < 1) throw ConfigError("c4 fixture needs n >= 1");
  for (double a : o.alpha) {
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("c4 alpha values must lie in (0, 1]");
  }
  const std::size_t d = o.alpha.size() * o.block_size;
  C4Fixture f;
  f.data.resize(static_cast<Eigen::Index>(o.n), static_cast<Eigen::Index>(d));
  std::vector<double> row(o.block_size);
  for (std::size_t b = 0; b < o.alpha.size(); ++b) {
    Rng block_rng = rng.fork(b + 1);
    for (std::size_t t = 0; t < o.n; ++t) {
      sample_logistic_block(o.alpha[b], block_rng, row);
      for (std::size_t i = 0; i < o.block_size; ++i) {
        f.data(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b * o.block_size + i)) = row[i];
      }
    }
    for (std::size_t i = 0; i < o.block_size; ++i) f.partition.push_back(b + 1);
  }
  f.truth_scenario_i = c4_truth(o, ThresholdSpec::halves(d, Scenario::I), &f.block_truth_i);
  f.truth_scenario_ii = c4_truth(o, ThresholdSpec::halves(d, Scenario::II), &f.block_truth_ii);
  return f;
}

Table site_table(const Eigen::MatrixXd& data) {
  Table t;
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    t.add("Y" + std::to_string(j + 1), {data.col(j).data(), data.col(j).data() + data.rows()});
  }
  return t;
}

}  // namespace tailrisk::fixtures
