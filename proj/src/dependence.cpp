#include "tailrisk/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>

#include "tailrisk/distributions.hpp"
#include "tailrisk/errors.hpp"

namespace tailrisk {
namespace {

void check_threshold(double u, std::size_t n) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("threshold probability must lie in (0, 1)");
  if ((1.0 - u) * static_cast<double>(n) < 10.0) throw DomainError("(1 - u) n must be at least 10");
}

std::vector<std::uint8_t> exceed_flags(std::span<const double> x, double u) {
  const auto f = empirical_cdf_ranks(x);
  std::vector<std::uint8_t> e(f.size());
  for (std::size_t t = 0; t < f.size(); ++t) e[t] = f[t] > u ? 1 : 0;
  return e;
}

void check_not_constant(std::span<const double> x) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) throw EstimationError("constant series has no exceedances");
}

struct PairCounts {
  std::size_t mi = 0, mj = 0, joint = 0;
};

PairCounts pair_counts(std::span<const double> x, std::span<const double> y, double u) {
  if (x.size() != y.size()) throw DomainError("series lengths differ");
  check_threshold(u, x.size());
  check_not_constant(x);
  check_not_constant(y);
  const auto ex = exceed_flags(x, u);
  const auto ey = exceed_flags(y, u);
  PairCounts c;
  for (std::size_t t = 0; t < ex.size(); ++t) {
    c.mi += ex[t];
    c.mj += ey[t];
    c.joint += ex[t] & ey[t];
  }
  return c;
}

double chi_from(std::size_t mi, std::size_t mj, std::size_t joint) {
  return static_cast<double>(joint) / std::sqrt(static_cast<double>(mi) * static_cast<double>(mj));
}

double chibar_from(std::size_t mi, std::size_t mj, std::size_t joint, std::size_t n) {
  const double nn = static_cast<double>(n);
  const double log_p = 0.5 * (std::log(static_cast<double>(mi) / nn) + std::log(static_cast<double>(mj) / nn));
  return 2.0 * log_p / std::log(static_cast<double>(joint) / nn) - 1.0;
}

}  // namespace

std::vector<double> empirical_cdf_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  for (double v : x) {
    if (std::isnan(v)) throw DataError("missing value in a rank-transformed series");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> f(n);
  const double denom = static_cast<double>(n) + 1.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) f[order[k]] = rank / denom;
    i = j;
  }
  return f;
}

double recommended_u(std::size_t n) {
  if (n == 0) throw DomainError("empty sample");
  return std::clamp(1.0 - 105.0 / static_cast<double>(n), 0.9, 0.995);
}

double chi_u(std::span<const double> x, std::span<const double> y, double u) {
  const PairCounts c = pair_counts(x, y, u);
  if (c.mi == 0 || c.mj == 0) throw EstimationError("no marginal exceedances");
  return chi_from(c.mi, c.mj, c.joint);
}

double chibar_u(std::span<const double> x, std::span<const double> y, double u) {
  const PairCounts c = pair_counts(x, y, u);
  if (c.mi == 0 || c.mj == 0) throw EstimationError("no marginal exceedances");
  if (c.joint == 0) throw NoJointExceedance("no joint exceedance above u; lower the threshold");
  return chibar_from(c.mi, c.mj, c.joint, x.size());
}

PairwiseDependence chibar_matrix(const Eigen::MatrixXd& data, double u) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  if (d < 2) throw DomainError("at least two columns are required");
  check_threshold(u, n);
  std::vector<std::vector<std::uint8_t>> exceed(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto col = data.col(static_cast<Eigen::Index>(j));
    std::vector<double> v(col.data(), col.data() + n);
    try {
      check_not_constant(v);
    } catch (const EstimationError& e) {
      throw EstimationError("column " + std::to_string(j + 1) + ": " + e.what());
    }
    exceed[j] = exceed_flags(v, u);
  }
  PairwiseDependence out;
  out.u = u;
  out.n = n;
  out.joint_counts = kernels::pairwise_joint_counts_parallel(exceed);
  out.chi = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  out.chibar = out.chi;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const std::size_t mi = out.joint_counts[i * d + i];
      const std::size_t mj = out.joint_counts[j * d + j];
      const std::size_t joint = out.joint_counts[i * d + j];
      const std::string pair = "(" + std::to_string(i + 1) + ", " + std::to_string(j + 1) + ")";
      if (joint == 0) throw NoJointExceedance("pair " + pair + " has no joint exceedance above u");
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      out.chi(ii, jj) = out.chi(jj, ii) = chi_from(mi, mj, joint);
      out.chibar(ii, jj) = out.chibar(jj, ii) = chibar_from(mi, mj, joint, n);
    }
  }
  return out;
}

namespace {

void check_correlation_shape(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw DomainError("matrix must be square and nonempty");
  if (!a.allFinite()) throw DataError("matrix has non-finite entries");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw DomainError("matrix must be symmetric");
  if ((a.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12) throw DomainError("matrix must have unit diagonal");
}

Eigen::MatrixXd clip_psd(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace

PsdProjection nearest_psd(const Eigen::MatrixXd& a, double tol, std::size_t max_iterations) {
  check_correlation_shape(a);
  PsdProjection out;
  out.min_eigenvalue_before = min_eigenvalue(a);
  if (out.min_eigenvalue_before >= -1e-12) {
    out.matrix = a;
    return out;
  }
  out.projected = true;
  Eigen::MatrixXd y = a;
  Eigen::MatrixXd correction = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  bool converged = false;
  for (std::size_t k = 0; k < max_iterations; ++k) {
    const Eigen::MatrixXd r = y - correction;
    const Eigen::MatrixXd x = clip_psd(r);
    correction = x - r;
    Eigen::MatrixXd next = x;
    next.diagonal().setOnes();
    out.residual = (next - y).norm();
    out.iterations = k + 1;
    y = std::move(next);
    if (out.residual < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw EstimationError("nearest PSD projection did not converge in " + std::to_string(max_iterations) +
                          " iterations (residual " + std::to_string(out.residual) + ")");
  }
  // The last unit-diagonal iterate can sit a hair outside the cone; clip and
  // rescale so the result is exactly a correlation matrix.
  Eigen::MatrixXd c = clip_psd(y);
  const Eigen::VectorXd s = c.diagonal().cwiseSqrt().cwiseInverse();
  c = s.asDiagonal() * c * s.asDiagonal();
  c = 0.5 * (c + c.transpose());
  c.diagonal().setOnes();
  out.matrix = std::move(c);
  return out;
}

Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& a) {
  const Eigen::Index d = a.rows();
  if (a.cols() != d) throw DomainError("matrix must be square");
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
  const double scale = std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < d; ++j) {
    double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (pivot < -1e-10 * scale) throw DomainError("matrix is not positive semi-definite");
    if (pivot <= 1e-14 * scale) continue;  // zero pivot: column stays zero
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < d; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

GaussianCopulaModel GaussianCopulaModel::from_correlation(const Eigen::MatrixXd& corr) {
  check_correlation_shape(corr);
  if (min_eigenvalue(corr) < -1e-10) {
    throw DomainError("correlation matrix is not positive semi-definite; project it with nearest_psd first");
  }
  GaussianCopulaModel m;
  m.corr = corr;
  m.chol = semidefinite_cholesky(corr);
  return m;
}

double gumbel_to_normal(double t) {
  namespace bm = boost::math;
  const bm::normal_distribution<double> n01;
  const double upper = gumbel_survival(t);
  if (upper < 0.5) return bm::quantile(bm::complement(n01, upper));
  return bm::quantile(n01, gumbel_cdf(t));
}

double normal_to_gumbel(double z) {
  if (z > 0.0) return -std::log(-std::log1p(-normal_survival(z)));
  return -std::log(-std::log(normal_cdf(z)));
}

McEstimate copula_joint_tail(const GaussianCopulaModel& model, std::span<const double> gumbel_thresholds,
                             std::uint64_t draws, std::uint64_t seed, const kernels::McPlan& plan) {
  if (gumbel_thresholds.size() != model.dim()) throw DomainError("one threshold per dimension is required");
  if (draws < 100000) throw DomainError("at least 1e5 Monte Carlo draws are required");
  if (plan.chunks == 0) throw ConfigError("Monte Carlo plan needs at least one chunk");
  std::vector<double> zt(gumbel_thresholds.size());
  for (std::size_t k = 0; k < zt.size(); ++k) zt[k] = gumbel_to_normal(gumbel_thresholds[k]);
  McEstimate e;
  e.draws = draws;
  e.hits = kernels::copula_hits_parallel(model.chol, zt, draws, seed, plan);
  e.p = static_cast<double>(e.hits) / static_cast<double>(draws);
  e.se = std::sqrt(e.p * (1.0 - e.p) / static_cast<double>(draws));
  return e;
}

Eigen::MatrixXd sample_gaussian_copula(const GaussianCopulaModel& model, std::size_t n, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd work(d), z(d);
  for (std::size_t t = 0; t < n; ++t) {
    kernels::draw_correlated_normal(rng, model.chol, work, z);
    for (Eigen::Index k = 0; k < d; ++k) out(static_cast<Eigen::Index>(t), k) = normal_to_gumbel(z[k]);
  }
  return out;
}

namespace {

std::vector<double> conditional_minima(std::span<const double> y1, std::span<const double> y2,
                                       std::span<const double> y3) {
  if (y1.size() != y2.size() || y1.size() != y3.size()) throw DomainError("series lengths differ");
  std::vector<double> v;
  for (std::size_t t = 0; t < y1.size(); ++t) {
    if (std::isnan(y1[t]) || std::isnan(y2[t]) || std::isnan(y3[t])) continue;
    if (y3[t] < kGumbelMedian) v.push_back(std::min(y1[t], y2[t]));
  }
  if (v.empty()) throw EstimationError("no observations satisfy the conditioning event");
  return v;
}

}  // namespace

P2Estimate estimate_p2(std::span<const double> y1, std::span<const double> y2, std::span<const double> y3,
                       double level, double threshold_quantile) {
  if (!(threshold_quantile > 0.0 && threshold_quantile < 1.0)) {
    throw DomainError("threshold quantile must lie in (0, 1)");
  }
  const auto v = conditional_minima(y1, y2, y3);
  P2Estimate e;
  e.n_conditional = v.size();
  e.threshold_quantile = threshold_quantile;
  e.fit = fit_pot(v, threshold_quantile, PotOptions{30});
  e.threshold = e.fit.threshold;
  if (!(level >= e.threshold)) throw DomainError("level lies below the GPD threshold");
  const double x = level - e.threshold;
  const double tail = gpd_in_support(x, e.fit.params) ? gpd_survival(x, e.fit.params) : 0.0;
  e.p = 0.5 * (1.0 - threshold_quantile) * tail;
  std::vector<double> grid;
  for (int k = 80; k <= 98; ++k) grid.push_back(k / 100.0);
  e.stability = threshold_stability(v, grid, PotOptions{30});
  return e;
}

std::vector<CurvePoint> p1_curve(const Eigen::MatrixXd& data, const GaussianCopulaModel& model,
                                 std::span<const double> grid, std::uint64_t draws, std::uint64_t seed) {
  if (static_cast<std::size_t>(data.cols()) != model.dim()) throw DomainError("data width does not match the model");
  const double n = static_cast<double>(data.rows());
  std::vector<CurvePoint> out;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CurvePoint c;
    c.y = grid[g];
    const auto hits = ((data.array() > c.y).rowwise().all()).count();
    c.empirical = static_cast<double>(hits) / n;
    c.empirical_se = std::sqrt(c.empirical * (1.0 - c.empirical) / n);
    const std::vector<double> th(model.dim(), c.y);
    const McEstimate m = copula_joint_tail(model, th, draws, derive_seed(seed, g));
    c.model = m.p;
    c.model_se = m.se;
    out.push_back(c);
  }
  return out;
}

std::vector<CurvePoint> p2_curve(std::span<const double> y1, std::span<const double> y2, std::span<const double> y3,
                                 std::span<const double> grid, double threshold_quantile) {
  if (y1.size() != y2.size() || y1.size() != y3.size()) throw DomainError("series lengths differ");
  const auto v = conditional_minima(y1, y2, y3);
  const GpdFit fit = fit_pot(v, threshold_quantile, PotOptions{30});
  const double nv = static_cast<double>(v.size());
  std::size_t n = 0;
  for (std::size_t t = 0; t < y1.size(); ++t) {
    if (!std::isnan(y1[t]) && !std::isnan(y2[t]) && !std::isnan(y3[t])) ++n;
  }
  std::vector<CurvePoint> out;
  for (double y : grid) {
    CurvePoint c;
    c.y = y;
    std::size_t joint = 0;
    for (std::size_t t = 0; t < y1.size(); ++t) {
      joint += (y1[t] > y && y2[t] > y && y3[t] < kGumbelMedian) ? 1 : 0;
    }
    c.empirical = static_cast<double>(joint) / static_cast<double>(n);
    c.empirical_se = std::sqrt(c.empirical * (1.0 - c.empirical) / static_cast<double>(n));
    if (y < fit.threshold) {
      const auto above = static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x > y; }));
      const double q = above / nv;
      c.model = 0.5 * q;
      c.model_se = 0.5 * std::sqrt(q * (1.0 - q) / nv);
    } else {
      const double x = y - fit.threshold;
      c.model = 0.5 * (1.0 - threshold_quantile) * (gpd_in_support(x, fit.params) ? gpd_survival(x, fit.params) : 0.0);
    }
    out.push_back(c);
  }
  return out;
}

std::vector<std::vector<std::size_t>> quantile_bins(std::span<const double> covariate, std::span<const double> cuts) {
  std::vector<double> obs;
  for (double v : covariate) {
    if (!std::isnan(v)) obs.push_back(v);
  }
  if (obs.empty()) throw DataError("covariate has no observed values");
  std::sort(obs.begin(), obs.end());
  std::vector<double> edges;
  for (double c : cuts) {
    if (!(c > 0.0 && c < 1.0)) throw DomainError("bin cut points must lie in (0, 1)");
    edges.push_back(empirical_quantile_sorted(obs, c));
  }
  if (!std::is_sorted(edges.begin(), edges.end())) throw DomainError("bin cut points must increase");
  std::vector<std::vector<std::size_t>> bins(cuts.size() + 1);
  for (std::size_t t = 0; t < covariate.size(); ++t) {
    const double v = covariate[t];
    if (std::isnan(v)) continue;
    const auto b = static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), v) - edges.begin());
    bins[b].push_back(t);
  }
  return bins;
}

std::vector<std::size_t> rows_equal(std::span<const double> column, double level) {
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < column.size(); ++t) {
    if (column[t] == level) rows.push_back(t);
  }
  return rows;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& data, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace tailrisk
