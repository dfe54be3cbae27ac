#include "tailrisk/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "tailrisk/errors.hpp"

namespace tailrisk {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + " must be finite");
}

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

void validate(const GpdParams& p) {
  require_finite(p.sigma, "GPD scale");
  require_finite(p.xi, "GPD shape");
  if (p.sigma <= 0.0) throw DomainError("GPD scale must be positive");
}

double gpd_upper_bound(const GpdParams& p) {
  return p.xi < 0.0 ? p.sigma / (-p.xi) : kInf;
}

bool gpd_in_support(double x, const GpdParams& p) {
  return x >= 0.0 && x <= gpd_upper_bound(p);
}

namespace {

void check_support(double x, const GpdParams& p) {
  validate(p);
  require_finite(x, "GPD argument");
  if (!gpd_in_support(x, p)) throw DomainError("GPD argument outside support");
}

// log of the survival function, valid inside the support.
double gpd_log_survival(double x, const GpdParams& p) {
  if (std::abs(p.xi) < kXiZeroTol) return -x / p.sigma;
  const double t = p.xi * x / p.sigma;
  // Rounding can push the upper endpoint of a negative-shape GPD slightly past -1.
  if (t <= -1.0) return -std::numeric_limits<double>::infinity();
  return -std::log1p(t) / p.xi;
}

}  // namespace

double gpd_cdf(double x, const GpdParams& p) {
  check_support(x, p);
  return -std::expm1(gpd_log_survival(x, p));
}

double gpd_survival(double x, const GpdParams& p) {
  check_support(x, p);
  return std::exp(gpd_log_survival(x, p));
}

double gpd_quantile(double prob, const GpdParams& p) {
  validate(p);
  if (!(prob >= 0.0 && prob < 1.0)) throw DomainError("GPD quantile level must lie in [0, 1)");
  const double log_tail = std::log1p(-prob);
  if (std::abs(p.xi) < kXiZeroTol) return -p.sigma * log_tail;
  return p.sigma * std::expm1(-p.xi * log_tail) / p.xi;
}

double gpd_logpdf(double z, const GpdParams& p) {
  validate(p);
  require_finite(z, "GPD argument");
  if (!gpd_in_support(z, p)) return -kInf;
  if (std::abs(p.xi) < kXiZeroTol) return -std::log(p.sigma) - z / p.sigma;
  return -std::log(p.sigma) - (1.0 + 1.0 / p.xi) * std::log1p(p.xi * z / p.sigma);
}

double gpd_loglik(std::span<const double> z, const GpdParams& p) {
  if (z.empty()) throw DomainError("GPD log-likelihood of an empty sample");
  double total = 0.0;
  for (double zi : z) {
    const double l = gpd_logpdf(zi, p);
    if (l == -kInf) return -kInf;
    total += l;
  }
  return total;
}

// With w = z/sigma and t = 1 + xi w:
//   dl/dsigma = -1/sigma + (xi + 1) w / (sigma t)
//   dl/dxi    = log(t)/xi^2 - (1 + 1/xi) w / t
// The xi-derivatives cancel catastrophically as xi w -> 0, where their series are used.
std::array<double, 2> gpd_logpdf_gradient(double z, const GpdParams& p) {
  const double w = z / p.sigma;
  const double a = p.xi * w;
  const double t = 1.0 + a;
  const double d_sigma = -1.0 / p.sigma + (p.xi + 1.0) * w / (p.sigma * t);
  double d_xi;
  if (std::abs(a) < 1e-5) {
    const double w2 = w * w;
    d_xi = w2 / 2.0 - w + p.xi * (w2 - 2.0 * w2 * w / 3.0) + p.xi * p.xi * (0.75 * w2 * w2 - w2 * w);
  } else {
    d_xi = std::log1p(a) / (p.xi * p.xi) - (1.0 + 1.0 / p.xi) * w / t;
  }
  return {d_sigma, d_xi};
}

std::array<double, 2> gpd_loglik_gradient(std::span<const double> z, const GpdParams& p) {
  validate(p);
  std::array<double, 2> g{0.0, 0.0};
  for (double zi : z) {
    if (!gpd_in_support(zi, p)) throw DomainError("GPD gradient evaluated outside support");
    const auto gi = gpd_logpdf_gradient(zi, p);
    g[0] += gi[0];
    g[1] += gi[1];
  }
  return g;
}

std::array<double, 3> gpd_loglik_hessian(std::span<const double> z, const GpdParams& p) {
  validate(p);
  const double s = p.sigma;
  const double xi = p.xi;
  std::array<double, 3> h{0.0, 0.0, 0.0};
  for (double zi : z) {
    if (!gpd_in_support(zi, p)) throw DomainError("GPD Hessian evaluated outside support");
    const double w = zi / s;
    const double a = xi * w;
    const double t = 1.0 + a;
    const double st = s * s * t;  // sigma^2 + xi z sigma
    h[0] += 1.0 / (s * s) - (xi + 1.0) * zi * (2.0 * s + xi * zi) / (st * st);
    h[1] += zi * (s - zi) / (s * s * s * t * t);
    if (std::abs(a) < 1e-5) {
      const double w2 = w * w;
      h[2] += w2 - 2.0 * w2 * w / 3.0 + xi * (1.5 * w2 * w2 - 2.0 * w2 * w);
    } else {
      h[2] += -2.0 * std::log1p(a) / (xi * xi * xi) + 2.0 * w / (xi * xi * t) + (1.0 + 1.0 / xi) * w * w / (t * t);
    }
  }
  return h;
}

double gpd_sample(const GpdParams& p, Rng& rng) {
  // Inversion with the survival variate U: x = sigma (U^-xi - 1)/xi.
  const double log_u = std::log(rng.uniform());
  if (std::abs(p.xi) < kXiZeroTol) return -p.sigma * log_u;
  return p.sigma * std::expm1(-p.xi * log_u) / p.xi;
}

double gumbel_cdf(double x) { return std::exp(-std::exp(-x)); }

double gumbel_survival(double x) { return -std::expm1(-std::exp(-x)); }

double gumbel_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("Gumbel quantile level must lie in (0, 1)");
  return -std::log(-std::log(prob));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_survival(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("normal quantile level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

void validate(const SimFamily& f) {
  require_finite(f.a, "family parameter");
  require_finite(f.b, "family parameter");
  switch (f.tag) {
    case Family::Frechet:
      if (f.a <= 0.0) throw DomainError("Frechet shape must be positive");
      break;
    case Family::Normal:
      if (f.b <= 0.0) throw DomainError("normal sd must be positive");
      break;
    case Family::StudentT:
      if (f.a <= 0.0) throw DomainError("t degrees of freedom must be positive");
      break;
    case Family::Burr:
      if (f.a <= 0.0 || f.b <= 0.0) throw DomainError("Burr shapes must be positive");
      break;
    case Family::Gumbel:
      if (f.b <= 0.0) throw DomainError("Gumbel scale must be positive");
      break;
  }
}

std::string family_name(Family tag) {
  switch (tag) {
    case Family::Frechet: return "frechet";
    case Family::Normal: return "normal";
    case Family::StudentT: return "t";
    case Family::Burr: return "burr";
    case Family::Gumbel: return "gumbel";
  }
  return "unknown";
}

Family parse_family(const std::string& name) {
  for (Family f : {Family::Frechet, Family::Normal, Family::StudentT, Family::Burr, Family::Gumbel}) {
    if (family_name(f) == name) return f;
  }
  throw DomainError("unknown family '" + name + "'");
}

double family_cdf(const SimFamily& f, double x) {
  validate(f);
  require_finite(x, "argument");
  switch (f.tag) {
    case Family::Frechet:
      return x <= 0.0 ? 0.0 : std::exp(-std::pow(x, -f.a));
    case Family::Normal:
      return normal_cdf((x - f.a) / f.b);
    case Family::StudentT:
      return boost::math::cdf(boost::math::students_t_distribution<double>(f.a), x);
    case Family::Burr:
      return x <= 0.0 ? 0.0 : -std::expm1(-f.b * std::log1p(std::pow(x, f.a)));
    case Family::Gumbel:
      return gumbel_cdf((x - f.a) / f.b);
  }
  return 0.0;
}

double family_quantile(const SimFamily& f, double prob) {
  validate(f);
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
  switch (f.tag) {
    case Family::Frechet:
      return std::pow(-std::log(prob), -1.0 / f.a);
    case Family::Normal:
      return f.a + f.b * normal_quantile(prob);
    case Family::StudentT:
      return boost::math::quantile(boost::math::students_t_distribution<double>(f.a), prob);
    case Family::Burr:
      // (1 - p)^(-1/k) - 1, raised to 1/c
      return std::pow(std::expm1(-std::log1p(-prob) / f.b), 1.0 / f.a);
    case Family::Gumbel:
      return f.a + f.b * gumbel_quantile(prob);
  }
  return 0.0;
}

std::vector<double> sample(const SimFamily& f, std::size_t n, Rng& rng) {
  validate(f);
  if (n == 0) throw DomainError("sample size must be at least 1");
  std::vector<double> out(n);
  switch (f.tag) {
    case Family::Frechet:
      for (auto& x : out) x = std::pow(-std::log(rng.uniform()), -1.0 / f.a);
      break;
    case Family::Normal:
      for (auto& x : out) x = f.a + f.b * rng.normal();
      break;
    case Family::StudentT:
      // Bailey's polar method.
      for (auto& x : out) {
        double u, v, w;
        do {
          u = 2.0 * rng.uniform() - 1.0;
          v = 2.0 * rng.uniform() - 1.0;
          w = u * u + v * v;
        } while (w >= 1.0);
        x = u * std::sqrt(f.a * (std::pow(w, -2.0 / f.a) - 1.0) / w);
      }
      break;
    case Family::Burr:
      for (auto& x : out) x = std::pow(std::expm1(-std::log(rng.uniform()) / f.b), 1.0 / f.a);
      break;
    case Family::Gumbel:
      for (auto& x : out) x = f.a - f.b * std::log(-std::log(rng.uniform()));
      break;
  }
  return out;
}

double empirical_quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw DomainError("empirical quantile of an empty sample");
  require_probability(prob, "quantile level");
  const double h = static_cast<double>(sorted.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double empirical_quantile(std::span<const double> x, double prob) {
  if (x.empty()) throw DomainError("empirical quantile of an empty sample");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  return empirical_quantile_sorted(sorted, prob);
}

}  // namespace tailrisk
