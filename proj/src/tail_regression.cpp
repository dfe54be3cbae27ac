#include "tailrisk/tail_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "tailrisk/distributions.hpp"
#include "tailrisk/errors.hpp"
#include "tailrisk/return_levels.hpp"

namespace tailrisk {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

// Unscaled feature columns (NaN where missing) for the given raw columns and rows.
std::vector<std::vector<double>> raw_features(const Table& raw, const std::vector<std::string>& raw_columns,
                                              const std::vector<bool>& is_angle, bool degrees,
                                              const std::vector<std::size_t>& rows) {
  std::vector<std::vector<double>> out;
  const double to_rad = degrees ? std::numbers::pi / 180.0 : 1.0;
  for (std::size_t c = 0; c < raw_columns.size(); ++c) {
    const long idx = raw.index_of(raw_columns[c]);
    if (idx < 0) throw DataError("column '" + raw_columns[c] + "' is missing");
    const auto& col = raw.columns[static_cast<std::size_t>(idx)];
    if (is_angle[c]) {
      std::vector<double> s(rows.size()), co(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const double a = col[rows[r]] * to_rad;
        s[r] = std::sin(a);
        co[r] = std::cos(a);
      }
      out.push_back(std::move(s));
      out.push_back(std::move(co));
    } else {
      std::vector<double> v(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) v[r] = col[rows[r]];
      out.push_back(std::move(v));
    }
  }
  return out;
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing_of(const Table& raw,
                                                               const std::vector<std::string>& raw_columns,
                                                               const std::vector<std::size_t>& rows) {
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> m(static_cast<Eigen::Index>(rows.size()),
                                                       static_cast<Eigen::Index>(raw_columns.size()));
  for (std::size_t c = 0; c < raw_columns.size(); ++c) {
    const auto& col = raw.columns[static_cast<std::size_t>(raw.index_of(raw_columns[c]))];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::isnan(col[rows[r]]);
    }
  }
  return m;
}

Eigen::MatrixXd scaled_design(const std::vector<std::vector<double>>& feats, const std::vector<FeatureMeta>& meta) {
  const auto n = static_cast<Eigen::Index>(feats.empty() ? 0 : feats.front().size());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(feats.size()));
  for (std::size_t j = 0; j < feats.size(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double v = feats[j][static_cast<std::size_t>(i)];
      if (std::isnan(v)) v = meta[j].impute;
      X(i, static_cast<Eigen::Index>(j)) = (v - meta[j].mean) / meta[j].sd;
    }
  }
  return X;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, std::span<const std::size_t> cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

}  // namespace

// ---------------------------------------------------------------- data

double Dataset::missing_row_rate() const {
  if (missing_mask.rows() == 0) return 0.0;
  const auto any = missing_mask.rowwise().any();
  return static_cast<double>(any.count()) / static_cast<double>(missing_mask.rows());
}

Dataset prepare(const Table& raw, const PrepareOptions& options) {
  const long ry = raw.index_of(options.response);
  if (ry < 0) throw DataError("response column '" + options.response + "' not found");
  for (const auto& a : options.angle_columns) {
    if (raw.index_of(a) < 0) throw DataError("angle column '" + a + "' not found");
  }

  Dataset d;
  d.response = options.response;
  d.angles_in_degrees = options.angles_in_degrees;
  std::vector<bool> is_angle;
  for (const auto& name : raw.names) {
    if (name == options.response || contains(options.exclude, name)) continue;
    d.raw_columns.push_back(name);
    is_angle.push_back(contains(options.angle_columns, name));
  }
  if (d.raw_columns.empty()) throw DataError("no covariate columns");

  const auto& ycol = raw.columns[static_cast<std::size_t>(ry)];
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    if (!std::isnan(ycol[r])) rows.push_back(r);
  }
  d.dropped_rows = raw.rows() - rows.size();
  if (rows.size() < 2) throw DataError("fewer than two rows with an observed response");

  auto feats = raw_features(raw, d.raw_columns, is_angle, options.angles_in_degrees, rows);
  for (std::size_t c = 0, j = 0; c < d.raw_columns.size(); ++c) {
    const int parts = is_angle[c] ? 2 : 1;
    for (int k = 0; k < parts; ++k, ++j) {
      FeatureMeta m;
      m.source = d.raw_columns[c];
      m.is_angle = is_angle[c];
      m.name = is_angle[c] ? m.source + (k == 0 ? "_sin" : "_cos") : m.source;
      std::vector<double> obs;
      for (double v : feats[j]) {
        if (!std::isnan(v)) obs.push_back(v);
      }
      if (obs.empty()) throw DataError("column '" + m.source + "' has no observed values");
      m.impute = mean_of(obs);
      // Statistics of the imputed column.
      std::vector<double> filled(feats[j]);
      for (double& v : filled) {
        if (std::isnan(v)) v = m.impute;
      }
      m.mean = mean_of(filled);
      m.sd = sample_sd(filled, m.mean);
      if (!(m.sd > 0.0)) m.sd = 1.0;
      d.feature_meta.push_back(m);
    }
  }
  d.X = scaled_design(feats, d.feature_meta);
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) d.y[static_cast<Eigen::Index>(r)] = ycol[rows[r]];
  d.missing_mask = missing_of(raw, d.raw_columns, rows);
  return d;
}

Dataset apply_preparation(const Table& raw, const Dataset& train) {
  Dataset d;
  d.response = train.response;
  d.raw_columns = train.raw_columns;
  d.feature_meta = train.feature_meta;
  d.angles_in_degrees = train.angles_in_degrees;
  std::vector<bool> is_angle;
  for (const auto& name : d.raw_columns) {
    bool angle = false;
    for (const auto& m : d.feature_meta) {
      if (m.source == name) angle = m.is_angle;
    }
    is_angle.push_back(angle);
  }
  std::vector<std::size_t> rows(raw.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto feats = raw_features(raw, d.raw_columns, is_angle, d.angles_in_degrees, rows);
  d.X = scaled_design(feats, d.feature_meta);
  const long ry = raw.index_of(d.response);
  if (ry >= 0) {
    const auto& ycol = raw.columns[static_cast<std::size_t>(ry)];
    d.y = Eigen::Map<const Eigen::VectorXd>(ycol.data(), static_cast<Eigen::Index>(ycol.size()));
  }
  d.missing_mask = missing_of(raw, d.raw_columns, rows);
  return d;
}

Dataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXd y) {
  if (y.size() != X.rows()) throw DomainError("design and response lengths differ");
  Dataset d;
  d.response = "Y";
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    FeatureMeta m;
    m.name = m.source = "X" + std::to_string(j + 1);
    d.feature_meta.push_back(m);
    d.raw_columns.push_back(m.name);
  }
  d.missing_mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(X.rows(), X.cols(), false);
  d.X = std::move(X);
  d.y = std::move(y);
  return d;
}

double pinball_loss(std::span<const double> y, std::span<const double> q, double tau) {
  if (y.size() != q.size() || y.empty()) throw DomainError("pinball loss needs equal, nonempty inputs");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - q[i];
    s += r * (tau - (r < 0.0 ? 1.0 : 0.0));
  }
  return s / static_cast<double>(y.size());
}

// ---------------------------------------------------------------- orthogonal GPD loss

double ogpd_loss(double z, double nu, double xi) {
  if (!(nu > 0.0) || !(xi > -1.0) || !(z >= 0.0) || !std::isfinite(nu) || !std::isfinite(xi) || !std::isfinite(z)) {
    return kInf;
  }
  const double a = (xi + 1.0) * z / nu;  // z / sigma
  const double t = xi * a;
  if (!(1.0 + t > 0.0)) return kInf;
  double head;
  if (std::abs(t) < 1e-5) {
    // log1p(t)/xi = a (1 - t/2 + t^2/3 - t^3/4 + ...)
    head = std::log1p(t) + a * (1.0 - t / 2.0 + t * t / 3.0 - t * t * t / 4.0);
  } else {
    head = (1.0 + 1.0 / xi) * std::log1p(t);
  }
  return head + std::log(nu) - std::log1p(xi);
}

std::array<double, 2> ogpd_loss_gradient(double z, double nu, double xi) {
  // loss(nu, xi) = -l(nu/(xi+1), xi) with l the GPD log-density in (sigma, xi).
  const double sigma = nu / (xi + 1.0);
  const auto g = gpd_logpdf_gradient(z, {sigma, xi});
  return {-g[0] / (xi + 1.0), -g[1] + g[0] * sigma / (xi + 1.0)};
}

std::string shape_mode_name(ShapeMode m) { return m == ShapeMode::Constant ? "constant" : "varying"; }

ShapeMode parse_shape_mode(const std::string& s) {
  if (s == "constant") return ShapeMode::Constant;
  if (s == "varying") return ShapeMode::Varying;
  throw ConfigError("shape mode must be 'constant' or 'varying', got '" + s + "'");
}

// ---------------------------------------------------------------- objectives

PinballObjective::PinballObjective(nn::Mlp mlp, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                                   double tau, double l2)
    : mlp_(std::move(mlp)), inputs_(inputs), targets_(targets), tau_(tau), l2_(l2) {
  if (mlp_.outputs() != 1) throw DomainError("pinball network must have one output");
}

double PinballObjective::loss(const Eigen::VectorXd& params, std::span<const std::size_t> rows) const {
  const Eigen::MatrixXd out = mlp_.forward(params, gather_columns(inputs_, rows));
  double s = 0.0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double r = targets_[static_cast<Eigen::Index>(rows[j])] - out(0, static_cast<Eigen::Index>(j));
    s += r * (tau_ - (r < 0.0 ? 1.0 : 0.0));
  }
  return s / static_cast<double>(rows.size());
}

double PinballObjective::loss_and_grad(const Eigen::VectorXd& params, std::span<const std::size_t> rows,
                                       Eigen::VectorXd& grad) const {
  nn::Mlp::Cache cache;
  const Eigen::MatrixXd out = mlp_.forward(params, gather_columns(inputs_, rows), &cache);
  const double inv_b = 1.0 / static_cast<double>(rows.size());
  Eigen::MatrixXd d_out(1, static_cast<Eigen::Index>(rows.size()));
  double s = 0.0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double r = targets_[static_cast<Eigen::Index>(rows[j])] - out(0, jj);
    const double below = r < 0.0 ? 1.0 : 0.0;
    s += r * (tau_ - below);
    d_out(0, jj) = (below - tau_) * inv_b;
  }
  mlp_.backward(params, cache, d_out, grad);
  mlp_.add_weight_decay(params, l2_, grad);
  return s * inv_b + l2_ * mlp_.weight_norm_sq(params);
}

OgpdObjective::OgpdObjective(nn::Mlp mlp, ShapeMode mode, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& z,
                             double nu_scale, double l2)
    : mlp_(std::move(mlp)), mode_(mode), inputs_(inputs), z_(z), nu_scale_(nu_scale), l2_(l2) {
  const std::size_t want = mode == ShapeMode::Constant ? 1 : 2;
  if (mlp_.outputs() != want) throw DomainError("GPD network output width does not match its shape mode");
}

double OgpdObjective::loss(const Eigen::VectorXd& params, std::span<const std::size_t> rows) const {
  return evaluate(params, rows, nullptr);
}

double OgpdObjective::loss_and_grad(const Eigen::VectorXd& params, std::span<const std::size_t> rows,
                                    Eigen::VectorXd& grad) const {
  const double data = evaluate(params, rows, &grad);
  if (!std::isfinite(data)) return data;
  const auto nm = static_cast<Eigen::Index>(mlp_.parameter_count());
  mlp_.add_weight_decay(params.head(nm), l2_, grad.head(nm));
  return data + l2_ * mlp_.weight_norm_sq(params.head(nm));
}

double OgpdObjective::evaluate(const Eigen::VectorXd& params, std::span<const std::size_t> rows,
                               Eigen::VectorXd* grad) const {
  const auto nm = static_cast<Eigen::Index>(mlp_.parameter_count());
  nn::Mlp::Cache cache;
  const Eigen::MatrixXd out = mlp_.forward(params.head(nm), gather_columns(inputs_, rows), grad ? &cache : nullptr);
  const double inv_b = 1.0 / static_cast<double>(rows.size());
  const bool constant = mode_ == ShapeMode::Constant;
  Eigen::MatrixXd d_out(out.rows(), out.cols());
  double shared_r_grad = 0.0;
  double s = 0.0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double o = out(0, jj);
    const double r = constant ? params[nm] : out(1, jj);
    const double nu = nu_scale_ * nn::softplus(o);
    const double xi = nn::softplus(r) - 1.0;
    const double z = z_[static_cast<Eigen::Index>(rows[j])];
    const double l = ogpd_loss(z, nu, xi);
    if (!std::isfinite(l)) return kInf;
    s += l;
    if (grad) {
      const auto g = ogpd_loss_gradient(z, nu, xi);
      d_out(0, jj) = g[0] * nu_scale_ * nn::sigmoid(o) * inv_b;
      const double dr = g[1] * nn::sigmoid(r) * inv_b;
      if (constant) {
        shared_r_grad += dr;
      } else {
        d_out(1, jj) = dr;
      }
    }
  }
  if (grad) {
    mlp_.backward(params.head(nm), cache, d_out, grad->head(nm));
    if (constant) (*grad)[nm] += shared_r_grad;
  }
  return s * inv_b;
}

// ---------------------------------------------------------------- intermediate quantiles

Eigen::VectorXd QuantileNetwork::predict(const Eigen::MatrixXd& X) const {
  const Eigen::MatrixXd out = mlp.forward(params, X.transpose());
  return (out.row(0).transpose().array() * y_scale + y_center).matrix();
}

namespace {

QuantileNetwork train_quantile_network(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y,
                                       const std::vector<std::size_t>& rows, const IntermediateConfig& config,
                                       Rng& rng, const QuantileNetwork* warm) {
  QuantileNetwork net;
  net.mlp = nn::Mlp(static_cast<std::size_t>(inputs.rows()), config.hidden, 1);
  std::vector<double> sub(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) sub[i] = y[static_cast<Eigen::Index>(rows[i])];
  const bool reuse = warm && warm->mlp.layer_sizes() == net.mlp.layer_sizes();
  if (reuse) {
    net.y_center = warm->y_center;
    net.y_scale = warm->y_scale;
    net.params = warm->params;
  } else {
    net.y_center = mean_of(sub);
    net.y_scale = sample_sd(sub, net.y_center);
    if (!(net.y_scale > 0.0)) net.y_scale = 1.0;
    net.params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.mlp.parameter_count()));
    net.mlp.initialize(net.params, rng);
    net.params[static_cast<Eigen::Index>(net.mlp.output_bias_index(0))] =
        (empirical_quantile(sub, config.level) - net.y_center) / net.y_scale;
  }
  const Eigen::VectorXd targets = ((y.array() - net.y_center) / net.y_scale).matrix();
  PinballObjective objective(net.mlp, inputs, targets, config.level, config.l2);
  std::vector<std::size_t> tr, va;
  nn::split_rows(rows.size(), config.train.validation_fraction, rng, tr, va);
  for (auto& i : tr) i = rows[i];
  for (auto& i : va) i = rows[i];
  net.trace = nn::train_adam(objective, net.params, tr, va, config.train, rng);
  return net;
}

}  // namespace

IntermediateQuantileModel fit_intermediate(const Dataset& data, const IntermediateConfig& config, Rng& rng,
                                           const IntermediateQuantileModel* warm) {
  if (!(config.level > 0.0 && config.level < 1.0)) throw DomainError("intermediate level must lie in (0, 1)");
  if (config.folds < 2) throw DomainError("at least two folds are required");
  const std::size_t n = data.n();
  if (n < 2 * config.folds) throw EstimationError("too few observations for the requested folds");
  if (data.p() == 0) throw DataError("no covariates");

  IntermediateQuantileModel model;
  model.level = config.level;
  model.fold_of.resize(n);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  for (std::size_t i = 0; i < n; ++i) model.fold_of[perm[i]] = i % config.folds;

  const Eigen::MatrixXd inputs = data.X.transpose();
  const QuantileNetwork* warm_net = warm ? &warm->final_model : nullptr;
  model.oof_predictions.resize(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < config.folds; ++k) {
    std::vector<std::size_t> train_rows, held;
    for (std::size_t i = 0; i < n; ++i) (model.fold_of[i] == k ? held : train_rows).push_back(i);
    try {
      model.fold_models.push_back(train_quantile_network(inputs, data.y, train_rows, config, rng, warm_net));
    } catch (const EstimationError& e) {
      throw EstimationError("intermediate quantile network, fold " + std::to_string(k + 1) + ": " + e.what());
    }
    Eigen::MatrixXd Xh(static_cast<Eigen::Index>(held.size()), data.X.cols());
    for (std::size_t i = 0; i < held.size(); ++i) Xh.row(static_cast<Eigen::Index>(i)) = data.X.row(static_cast<Eigen::Index>(held[i]));
    const Eigen::VectorXd pred = model.fold_models.back().predict(Xh);
    for (std::size_t i = 0; i < held.size(); ++i) model.oof_predictions[static_cast<Eigen::Index>(held[i])] = pred[static_cast<Eigen::Index>(i)];
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  try {
    model.final_model = train_quantile_network(inputs, data.y, all, config, rng, warm_net);
  } catch (const EstimationError& e) {
    throw EstimationError(std::string("intermediate quantile network, final fit: ") + e.what());
  }
  return model;
}

// ---------------------------------------------------------------- GPD network

Eigen::MatrixXd GpdNetwork::inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& q0) const {
  Eigen::MatrixXd in(X.cols() + 1, X.rows());
  in.topRows(X.cols()) = X.transpose();
  in.row(X.cols()) = ((q0.array() - q_mean) / q_sd).matrix().transpose();
  return in;
}

GpdOutput GpdNetwork::predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& q0) const {
  const auto nm = static_cast<Eigen::Index>(mlp.parameter_count());
  const Eigen::MatrixXd out = mlp.forward(params.head(nm), inputs(X, q0));
  GpdOutput g;
  const Eigen::Index n = X.rows();
  g.nu.resize(n);
  g.xi.resize(n);
  g.sigma.resize(n);
  const bool constant = shape_mode == ShapeMode::Constant;
  const double xi_const = constant ? nn::softplus(params[nm]) - 1.0 : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    g.nu[i] = nu_scale * nn::softplus(out(0, i));
    g.xi[i] = constant ? xi_const : nn::softplus(out(1, i)) - 1.0;
    g.sigma[i] = g.nu[i] / (g.xi[i] + 1.0);
  }
  return g;
}

Exceedances exceedances_over(const Dataset& data, const Eigen::VectorXd& q0) {
  Exceedances e;
  std::vector<double> z;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (data.y[ii] > q0[ii]) {
      e.rows.push_back(i);
      z.push_back(data.y[ii] - q0[ii]);
    }
  }
  e.z = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  return e;
}

namespace {

constexpr std::size_t kMinNetworkExceedances = 50;

struct ExceedanceDesign {
  Exceedances ex;
  Eigen::MatrixXd X;   // exceedance rows of the covariates
  Eigen::VectorXd q0;  // their out-of-fold intermediate quantiles
};

ExceedanceDesign exceedance_design(const Dataset& data, const Eigen::VectorXd& oof) {
  ExceedanceDesign d;
  d.ex = exceedances_over(data, oof);
  if (d.ex.rows.size() < kMinNetworkExceedances) {
    throw EstimationError("only " + std::to_string(d.ex.rows.size()) +
                          " exceedances of the intermediate quantile; at least 50 are required");
  }
  const auto m = static_cast<Eigen::Index>(d.ex.rows.size());
  d.X.resize(m, data.X.cols());
  d.q0.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto r = static_cast<Eigen::Index>(d.ex.rows[static_cast<std::size_t>(i)]);
    d.X.row(i) = data.X.row(r);
    d.q0[i] = oof[r];
  }
  return d;
}

GpdNetwork train_gpd(const ExceedanceDesign& design, const std::vector<std::size_t>& train_rows,
                     const std::vector<std::size_t>& val_rows, const GpdNetworkConfig& config, Rng& rng,
                     const GpdNetwork* warm) {
  GpdNetwork net;
  net.shape_mode = config.shape_mode;
  net.l2 = config.l2;
  const std::size_t outputs = config.shape_mode == ShapeMode::Constant ? 1 : 2;
  net.mlp = nn::Mlp(static_cast<std::size_t>(design.X.cols()) + 1, config.hidden, outputs);
  const std::size_t n_params = net.mlp.parameter_count() + (outputs == 1 ? 1 : 0);
  const bool reuse = warm && warm->shape_mode == config.shape_mode &&
                     warm->mlp.layer_sizes() == net.mlp.layer_sizes();
  const std::span<const double> zspan(design.ex.z.data(), static_cast<std::size_t>(design.ex.z.size()));
  if (reuse) {
    net.nu_scale = warm->nu_scale;
    net.q_mean = warm->q_mean;
    net.q_sd = warm->q_sd;
    net.params = warm->params;
  } else {
    net.nu_scale = mean_of(zspan);
    const std::span<const double> qspan(design.q0.data(), static_cast<std::size_t>(design.q0.size()));
    net.q_mean = mean_of(qspan);
    net.q_sd = sample_sd(qspan, net.q_mean);
    if (!(net.q_sd > 0.0)) net.q_sd = 1.0;
    net.params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));
    net.mlp.initialize(net.params.head(static_cast<Eigen::Index>(net.mlp.parameter_count())), rng);
    // Start from the unconditional fit: zero output weights, biases at its parameters.
    double sigma0 = net.nu_scale, xi0 = 0.1;
    try {
      const GpdFit f = fit_gpd(zspan);
      sigma0 = f.params.sigma;
      xi0 = std::clamp(f.params.xi, -0.45, 0.9);
    } catch (const std::exception&) {
    }
    const auto& sizes = net.mlp.layer_sizes();
    const std::size_t last_in = sizes[sizes.size() - 2];
    const std::size_t first_bias = net.mlp.output_bias_index(0);
    for (std::size_t k = 0; k < outputs * last_in; ++k) net.params[static_cast<Eigen::Index>(first_bias - outputs * last_in + k)] = 0.0;
    net.params[static_cast<Eigen::Index>(first_bias)] = nn::softplus_inverse(sigma0 * (xi0 + 1.0) / net.nu_scale);
    const double r0 = nn::softplus_inverse(xi0 + 1.0);
    if (outputs == 1) {
      net.params[static_cast<Eigen::Index>(n_params - 1)] = r0;
    } else {
      net.params[static_cast<Eigen::Index>(net.mlp.output_bias_index(1))] = r0;
    }
  }
  const Eigen::MatrixXd inputs = net.inputs(design.X, design.q0);
  OgpdObjective objective(net.mlp, config.shape_mode, inputs, design.ex.z, net.nu_scale, config.l2);
  net.trace = nn::train_adam(objective, net.params, train_rows, val_rows, config.train, rng);
  return net;
}

}  // namespace

GpdNetwork fit_gpd_network(const Dataset& data, const IntermediateQuantileModel& inter, const GpdNetworkConfig& config,
                           Rng& rng, const GpdNetwork* warm) {
  const ExceedanceDesign design = exceedance_design(data, inter.oof_predictions);
  std::vector<std::size_t> tr, va;
  nn::split_rows(design.ex.rows.size(), config.train.validation_fraction, rng, tr, va);
  try {
    return train_gpd(design, tr, va, config, rng, warm);
  } catch (const EstimationError& e) {
    throw EstimationError(std::string("GPD network: ") + e.what());
  }
}

std::vector<GpdNetworkConfig> default_grid(const nn::TrainOptions& train) {
  std::vector<GpdNetworkConfig> grid;
  const std::vector<std::vector<std::size_t>> hidden{{20, 10}, {32, 16}, {16}};
  for (const auto& h : hidden) {
    for (double l2 : {1e-3, 1e-4, 1e-5}) {
      for (ShapeMode m : {ShapeMode::Constant, ShapeMode::Varying}) grid.push_back({h, l2, m, train});
    }
  }
  return grid;
}

GridSearchResult select_gpd_network(const Dataset& data, const IntermediateQuantileModel& inter,
                                    std::span<const GpdNetworkConfig> grid, Rng& rng) {
  if (grid.empty()) throw ConfigError("empty grid");
  const ExceedanceDesign design = exceedance_design(data, inter.oof_predictions);
  std::vector<std::size_t> tr, va;
  nn::split_rows(design.ex.rows.size(), grid.front().train.validation_fraction, rng, tr, va);
  const std::uint64_t base = rng.next_u64();
  GridSearchResult result;
  std::optional<GpdNetwork> best;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    GridCell cell;
    cell.config = grid[c];
    try {
      Rng cell_rng(derive_seed(base, c));
      GpdNetwork net = train_gpd(design, tr, va, grid[c], cell_rng, nullptr);
      cell.ok = true;
      cell.validation_loss = net.trace.best_validation;
      cell.epochs = net.trace.validation_loss.size();
      if (!best || cell.validation_loss < result.cells[result.best_index].validation_loss) {
        best = std::move(net);
        result.best_index = c;
      }
    } catch (const EstimationError& e) {
      cell.message = e.what();
    }
    result.cells.push_back(cell);
  }
  if (!best) throw EstimationError("every grid cell failed to train");
  result.best = std::move(*best);
  return result;
}

// ---------------------------------------------------------------- full model

double extrapolate_quantile(double q0, double sigma, double xi, double tau0, double tau) {
  if (!(tau0 > 0.0 && tau0 < 1.0 && tau >= tau0 && tau < 1.0)) {
    throw DomainError("extrapolation needs 0 < tau0 <= tau < 1");
  }
  if (!(sigma > 0.0)) throw DomainError("GPD scale must be positive");
  if (tau == tau0) return q0;
  const double log_ratio = std::log1p(-tau0) - std::log1p(-tau);  // -log((1-tau)/(1-tau0)) > 0
  if (std::abs(xi) < kXiZeroTol) return q0 + sigma * log_ratio;
  return q0 + sigma * std::expm1(xi * log_ratio) / xi;
}

TailRegressionModel fit_tail_model(const Dataset& data, const TailRegressionConfig& config, Rng& rng,
                                   const TailRegressionModel* warm) {
  if (data.y.size() != data.X.rows()) throw DataError("training data needs a response");
  TailRegressionModel model;
  model.config = config;
  model.intermediate = fit_intermediate(data, config.intermediate, rng, warm ? &warm->intermediate : nullptr);
  if (config.grid_search && !warm) {
    const auto grid = config.grid.empty() ? default_grid(config.gpd.train) : config.grid;
    GridSearchResult g = select_gpd_network(data, model.intermediate, grid, rng);
    model.gpd = std::move(g.best);
    model.config.gpd = grid[g.best_index];
    model.grid_cells = std::move(g.cells);
  } else {
    model.gpd = fit_gpd_network(data, model.intermediate, config.gpd, rng, warm ? &warm->gpd : nullptr);
  }
  return model;
}

Eigen::VectorXd predict_extreme_quantiles(const TailRegressionModel& model, const Eigen::MatrixXd& X, double tau) {
  const double tau0 = model.tau0();
  if (!(tau > tau0 && tau < 1.0)) throw DomainError("prediction level must satisfy tau0 < tau < 1");
  if (static_cast<std::size_t>(X.cols()) + 1 != model.gpd.mlp.inputs()) {
    throw DomainError("covariate width does not match the model");
  }
  const Eigen::VectorXd q0 = model.intermediate.predict(X);
  const GpdOutput g = model.gpd.predict(X, q0);
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = extrapolate_quantile(q0[i], g.sigma[i], g.xi[i], tau0, tau);
  return out;
}

double predict_extreme_quantile(const TailRegressionModel& model, const Eigen::VectorXd& x, double tau) {
  return predict_extreme_quantiles(model, x.transpose(), tau)[0];
}

// ---------------------------------------------------------------- bootstrap

QuantilePrediction normal_interval(double point, std::span<const double> replicates, double confidence, double level) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0, 1)");
  if (replicates.size() < 2) throw DomainError("an interval needs at least two replicates");
  const double m = mean_of(replicates);
  const double sd = sample_sd(replicates, m);
  const double half = normal_quantile(0.5 * (1.0 + confidence)) * sd;
  return {point, point - half, point + half, level, confidence};
}

QuantilePrediction percentile_interval(double point, std::span<const double> replicates, double confidence,
                                       double level) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0, 1)");
  if (replicates.size() < 2) throw DomainError("an interval needs at least two replicates");
  std::vector<double> s(replicates.begin(), replicates.end());
  std::sort(s.begin(), s.end());
  return {point, empirical_quantile_sorted(s, 0.5 * (1.0 - confidence)),
          empirical_quantile_sorted(s, 0.5 * (1.0 + confidence)), level, confidence};
}

namespace {

Dataset resample_with(const Dataset& data, const Eigen::VectorXd& q0, const GpdOutput& g, Rng& rng,
                      std::vector<std::uint8_t>* replaced) {
  const std::size_t n = data.n();
  Dataset out = data;
  if (replaced) replaced->assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = static_cast<Eigen::Index>(rng.index(n));
    const auto ii = static_cast<Eigen::Index>(i);
    out.X.row(ii) = data.X.row(src);
    out.missing_mask.row(ii) = data.missing_mask.row(src);
    double y = data.y[src];
    if (y >= q0[src]) {
      y = q0[src] + gpd_sample({g.sigma[src], g.xi[src]}, rng);
      if (replaced) (*replaced)[i] = 1;
    }
    out.y[ii] = y;
  }
  return out;
}

}  // namespace

Dataset semiparametric_resample(const Dataset& data, const TailRegressionModel& model, Rng& rng,
                                std::vector<std::uint8_t>* replaced) {
  const Eigen::VectorXd& q0 = model.intermediate.oof_predictions;
  if (q0.size() != data.y.size()) throw DomainError("model was not fitted on this dataset");
  return resample_with(data, q0, model.gpd.predict(data.X, q0), rng, replaced);
}

BootstrapResult semiparametric_bootstrap(const Dataset& data, const TailRegressionModel& model,
                                         const Eigen::MatrixXd& X_test, double tau, const BootstrapOptions& options,
                                         Rng& rng) {
  if (options.B < 2) throw DomainError("bootstrap needs at least two resamples");
  const Eigen::VectorXd& q0 = model.intermediate.oof_predictions;
  if (q0.size() != data.y.size()) throw DomainError("model was not fitted on this dataset");
  BootstrapResult result;
  if (options.B < 50) result.warnings.push_back("fewer than 50 bootstrap resamples");

  const Eigen::VectorXd point = predict_extreme_quantiles(model, X_test, tau);
  const GpdOutput g = model.gpd.predict(data.X, q0);
  TailRegressionConfig config = model.config;
  config.grid_search = false;
  const std::uint64_t base = rng.next_u64();
  const auto B = static_cast<long>(options.B);

  std::vector<Eigen::VectorXd> preds(options.B);
  std::vector<std::string> errors(options.B);
#pragma omp parallel for schedule(dynamic)
  for (long b = 0; b < B; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    try {
      Rng r(derive_seed(base, bi));
      const Dataset d = resample_with(data, q0, g, r, nullptr);
      const TailRegressionModel m = fit_tail_model(d, config, r, options.warm_start ? &model : nullptr);
      preds[bi] = predict_extreme_quantiles(m, X_test, tau);
      if (!preds[bi].allFinite()) throw EstimationError("non-finite prediction");
    } catch (const std::exception& e) {
      preds[bi].resize(0);
      errors[bi] = e.what();
    }
  }

  std::vector<std::size_t> ok;
  for (std::size_t b = 0; b < options.B; ++b) {
    if (preds[b].size() == X_test.rows()) {
      ok.push_back(b);
    } else {
      ++result.dropped;
      result.warnings.push_back("resample " + std::to_string(b) + " dropped: " + errors[b]);
    }
  }
  if (static_cast<double>(result.dropped) > options.max_drop_fraction * static_cast<double>(options.B)) {
    throw EstimationError(std::to_string(result.dropped) + " of " + std::to_string(options.B) +
                          " bootstrap refits failed");
  }
  result.replicates.resize(X_test.rows(), static_cast<Eigen::Index>(ok.size()));
  for (std::size_t j = 0; j < ok.size(); ++j) result.replicates.col(static_cast<Eigen::Index>(j)) = preds[ok[j]];
  std::vector<double> row(ok.size());
  for (Eigen::Index i = 0; i < X_test.rows(); ++i) {
    for (std::size_t j = 0; j < ok.size(); ++j) row[j] = result.replicates(i, static_cast<Eigen::Index>(j));
    result.predictions.push_back(options.interval == IntervalKind::Normal
                                     ? normal_interval(point[i], row, options.confidence, tau)
                                     : percentile_interval(point[i], row, options.confidence, tau));
  }
  return result;
}

}  // namespace tailrisk
