#include "tailrisk/app/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>

#include <omp.h>

#include "tailrisk/app/bench.hpp"
#include "tailrisk/app/fixtures.hpp"
#include "tailrisk/app/io.hpp"
#include "tailrisk/clusters.hpp"
#include "tailrisk/dependence.hpp"
#include "tailrisk/errors.hpp"
#include "tailrisk/return_levels.hpp"

namespace tailrisk::tasks {
namespace fs = std::filesystem;

namespace {

json c1_defaults() {
  return {{"train", ""},
          {"test", ""},
          {"model", ""},
          {"response", "Y"},
          {"angle_columns", json::array()},
          {"angles_in_degrees", true},
          {"exclude", json::array()},
          {"tau0", 0.8},
          {"tau", 0.9999},
          {"folds", 5},
          {"intermediate_hidden", {20, 10}},
          {"intermediate_l2", 1e-4},
          {"intermediate_epochs", 300},
          {"intermediate_learning_rate", 5e-3},
          {"hidden", {20, 10}},
          {"l2", 1e-4},
          {"shape_mode", "constant"},
          {"epochs", 500},
          {"learning_rate", 1e-3},
          {"batch_size", 256},
          {"patience", 20},
          {"grid_search", false},
          {"B", 100},
          {"confidence", 0.5},
          {"warm_start", true},
          {"interval", "normal"}};
}

json c2_defaults() {
  return {{"input", ""},
          {"column", "Y"},
          {"T", 200.0},
          {"n_per_year", 300.0},
          {"k", 7},
          {"threshold_quantile", 0.95},
          {"confidence", 0.95},
          {"shuffle", false},
          {"level_convention", "standard"},
          {"stability_grid", {0.80, 0.82, 0.84, 0.86, 0.88, 0.90, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98}}};
}

json c3_defaults() {
  return {{"input", ""},
          {"columns", {"Y1", "Y2", "Y3"}},
          {"u", 0.995},
          {"draws", 10000000},
          {"chunks", 64},
          {"thresholds", {6.0, 6.0, 6.0}},
          {"p2_level", 7.0},
          {"threshold_quantile", 0.95},
          {"curve_grid", {2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0}},
          {"curve_draws", 1000000},
          {"season_column", ""},
          {"atmosphere_column", ""}};
}

json c4_defaults() {
  return {{"input", ""},
          {"columns", json::array()},
          {"u", 0.9},
          {"k", "auto"},
          {"linkage", "average"},
          {"scenario", "both"},
          {"s1", 5.702113},
          {"s2", 3.198534},
          {"p0_grid", default_p0_grid()},
          {"use_chi", true},
          {"extrapolate_all", false},
          {"scatter_u_grid", {0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 0.99}}};
}

json bench_defaults() {
  return {{"families",
           {{{"name", "frechet"}, {"params", {2.0}}},
            {{"name", "normal"}, {"params", {0.0, 1.0}}},
            {{"name", "t"}, {"params", {4.0}}},
            {{"name", "burr"}, {"params", {1.0, 2.0}}}}},
          {"sizes", {5000}},
          {"replicates", 100},
          {"T", 200.0},
          {"obs_divisor", 70.0},
          {"k", 7},
          {"threshold_quantile", 0.95}};
}

json fixture_defaults(const std::string& kind) {
  if (kind == "c1_synth") {
    const fixtures::C1Options o;
    return {{"n", o.n},
            {"n_test", o.n_test},
            {"p", o.p},
            {"variant", "homogeneous"},
            {"sigma0", o.sigma0},
            {"xi", o.xi},
            {"missing_rate", o.missing_rate},
            {"angle", o.angle},
            {"tau", o.tau}};
  }
  if (kind == "c3_trivariate") {
    return {{"n", 21000}, {"rho", 0.5}, {"covariates", false}, {"thresholds", {6.0, 6.0, 6.0}}, {"p2_level", 7.0}};
  }
  if (kind == "c4_blocks") {
    const fixtures::C4Options o;
    return {{"n", o.n}, {"block_size", o.block_size}, {"alpha", o.alpha}};
  }
  throw ConfigError("fixture kind must be c1_synth, c3_trivariate or c4_blocks, got '" + kind + "'");
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  if (a.is_array() && b.is_array()) return true;
  return a.type() == b.type();
}

json merge_params(const json& defaults, const json& given, const std::string& where) {
  if (!given.is_object()) throw ConfigError(where + ": params must be a JSON object");
  json out = defaults;
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (!defaults.contains(it.key())) throw ConfigError(where + ": unknown parameter '" + it.key() + "'");
    const json& d = defaults[it.key()];
    // "k" may be a number or "auto".
    const bool k_choice = it.key() == "k" && d.is_string() && it.value().is_number_integer();
    if (!same_kind(d, it.value()) && !k_choice) {
      throw ConfigError(where + ": parameter '" + it.key() + "' has the wrong type");
    }
    out[it.key()] = it.value();
  }
  return out;
}

std::string require_path(const json& p, const std::string& key, const std::string& task) {
  const std::string v = p.at(key).get<std::string>();
  if (v.empty()) throw ConfigError(task + ": parameter '" + key + "' (file path) is required");
  return v;
}

template <class T>
T positive(const json& p, const std::string& key) {
  const T v = p.at(key).get<T>();
  if (!(v > T{0})) throw ConfigError("parameter '" + key + "' must be positive");
  return v;
}

double probability(const json& p, const std::string& key) {
  const double v = p.at(key).get<double>();
  if (!(v > 0.0 && v < 1.0)) throw ConfigError("parameter '" + key + "' must lie in (0, 1)");
  return v;
}

json gpd_fit_json(const GpdFit& f) {
  return {{"sigma", f.params.sigma},
          {"xi", f.params.xi},
          {"threshold", f.threshold},
          {"n_exceed", f.n_exceed},
          {"n_total", f.n_total},
          {"cov", {{f.cov[0][0], f.cov[0][1]}, {f.cov[1][0], f.cov[1][1]}}},
          {"loglik", f.loglik}};
}

json stability_json(const std::vector<StabilityPoint>& s) {
  json a = json::array();
  for (const auto& p : s) {
    a.push_back({{"threshold_quantile", p.threshold_quantile},
                 {"threshold", p.threshold},
                 {"n_exceed", p.n_exceed},
                 {"ok", p.ok},
                 {"sigma", p.sigma},
                 {"xi", p.xi},
                 {"modified_scale", p.modified_scale}});
  }
  return a;
}

using io::format_double;

// ---------------------------------------------------------------- c1

TailRegressionConfig c1_model_config(const json& p) {
  TailRegressionConfig c;
  c.intermediate.level = probability(p, "tau0");
  c.intermediate.folds = p.at("folds").get<std::size_t>();
  if (c.intermediate.folds < 2) throw ConfigError("folds must be at least 2");
  c.intermediate.hidden = p.at("intermediate_hidden").get<std::vector<std::size_t>>();
  c.intermediate.l2 = p.at("intermediate_l2").get<double>();
  c.intermediate.train.max_epochs = p.at("intermediate_epochs").get<std::size_t>();
  c.intermediate.train.learning_rate = positive<double>(p, "intermediate_learning_rate");
  c.gpd.hidden = p.at("hidden").get<std::vector<std::size_t>>();
  c.gpd.l2 = p.at("l2").get<double>();
  c.gpd.shape_mode = parse_shape_mode(p.at("shape_mode").get<std::string>());
  c.gpd.train.max_epochs = p.at("epochs").get<std::size_t>();
  c.gpd.train.learning_rate = positive<double>(p, "learning_rate");
  const auto batch = positive<std::size_t>(p, "batch_size");
  const auto patience = positive<std::size_t>(p, "patience");
  c.intermediate.train.batch_size = c.gpd.train.batch_size = batch;
  c.intermediate.train.patience = c.gpd.train.patience = patience;
  if (c.intermediate.l2 < 0.0 || c.gpd.l2 < 0.0) throw ConfigError("l2 penalties must be nonnegative");
  c.grid_search = p.at("grid_search").get<bool>();
  return c;
}

PrepareOptions c1_prepare_options(const json& p) {
  PrepareOptions o;
  o.response = p.at("response").get<std::string>();
  o.angle_columns = p.at("angle_columns").get<std::vector<std::string>>();
  o.angles_in_degrees = p.at("angles_in_degrees").get<bool>();
  o.exclude = p.at("exclude").get<std::vector<std::string>>();
  return o;
}

json trace_json(const nn::TrainTrace& t) {
  return {{"epochs", t.validation_loss.size()},
          {"best_epoch", t.best_epoch},
          {"best_validation", t.best_validation},
          {"step_rejections", t.step_rejections}};
}

json train_diagnostics(const TailRegressionModel& m, const Dataset& d) {
  json folds = json::array();
  for (const auto& f : m.intermediate.fold_models) folds.push_back(trace_json(f.trace));
  json cells = json::array();
  for (const auto& c : m.grid_cells) {
    cells.push_back({{"hidden", c.config.hidden},
                     {"l2", c.config.l2},
                     {"shape_mode", shape_mode_name(c.config.shape_mode)},
                     {"ok", c.ok},
                     {"validation_loss", c.ok ? json(c.validation_loss) : json(nullptr)},
                     {"epochs", c.epochs},
                     {"message", c.message}});
  }
  const auto ex = exceedances_over(d, m.intermediate.oof_predictions);
  return {{"n", d.n()},
          {"p", d.p()},
          {"dropped_rows", d.dropped_rows},
          {"missing_row_rate", d.missing_row_rate()},
          {"features", [&] {
             json a = json::array();
             for (const auto& f : d.feature_meta) a.push_back(f.name);
             return a;
           }()},
          {"intermediate", {{"level", m.intermediate.level}, {"final", trace_json(m.intermediate.final_model.trace)},
                            {"folds", folds}}},
          {"exceedances", ex.rows.size()},
          {"gpd_network", {{"hidden", m.config.gpd.hidden},
                           {"l2", m.gpd.l2},
                           {"shape_mode", shape_mode_name(m.gpd.shape_mode)},
                           {"trace", trace_json(m.gpd.trace)},
                           {"validation_losses", m.gpd.trace.validation_loss}}},
          {"grid_cells", cells}};
}

TailRegressionModel fit_c1(const json& p, const Dataset& d, std::uint64_t seed) {
  Rng rng = Rng(seed).fork(1);
  return fit_tail_model(d, c1_model_config(p), rng);
}

void write_predictions(const fs::path& path, const std::vector<QuantilePrediction>& preds, bool with_interval) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& q : preds) {
    if (with_interval) {
      rows.push_back({format_double(q.point), format_double(q.lower), format_double(q.upper)});
    } else {
      rows.push_back({format_double(q.point)});
    }
  }
  io::write_csv(path, with_interval ? std::vector<std::string>{"point", "lower", "upper"}
                                    : std::vector<std::string>{"point"},
                rows);
}

json run_c1(const RunConfig& c, const fs::path& out) {
  const json& p = c.params;
  json result;
  if (c.phase == "train") {
    const Table raw = io::read_csv(require_path(p, "train", "c1 train"));
    const Dataset d = prepare(raw, c1_prepare_options(p));
    const auto model = fit_c1(p, d, c.seed);
    io::write_json(out / "model.json", model_to_json(model, d));
    result["diagnostics"] = train_diagnostics(model, d);
    result["model_file"] = "model.json";
    return result;
  }

  const double tau = probability(p, "tau");
  const Table test_raw = io::read_csv(require_path(p, "test", "c1 " + c.phase));
  if (c.phase == "predict") {
    Dataset prep;
    const auto model = model_from_json(io::read_json(require_path(p, "model", "c1 predict")), prep);
    const Dataset test = apply_preparation(test_raw, prep);
    const Eigen::VectorXd q = predict_extreme_quantiles(model, test.X, tau);
    std::vector<QuantilePrediction> preds;
    for (Eigen::Index i = 0; i < q.size(); ++i) preds.push_back({q(i), q(i), q(i), tau, 0.0});
    write_predictions(out / "predictions.csv", preds, false);
    result["n_test"] = q.size();
    result["tau"] = tau;
    result["predictions"] = io::to_vector(q);
    return result;
  }

  // bootstrap
  const Table raw = io::read_csv(require_path(p, "train", "c1 bootstrap"));
  Dataset d;
  TailRegressionModel model;
  const std::string model_path = p.at("model").get<std::string>();
  if (model_path.empty()) {
    d = prepare(raw, c1_prepare_options(p));
    model = fit_c1(p, d, c.seed);
  } else {
    Dataset prep;
    model = model_from_json(io::read_json(model_path), prep);
    d = apply_preparation(raw, prep);
    if (d.y.size() != static_cast<Eigen::Index>(d.n())) throw DataError("training file lacks the response column");
    if (model.intermediate.oof_predictions.size() != d.y.size()) {
      throw DataError("model was fitted on a different number of training rows");
    }
  }
  const Dataset test = apply_preparation(test_raw, d);
  BootstrapOptions bo;
  bo.B = p.at("B").get<std::size_t>();
  bo.confidence = probability(p, "confidence");
  bo.warm_start = p.at("warm_start").get<bool>();
  const std::string interval = p.at("interval").get<std::string>();
  if (interval == "normal") {
    bo.interval = IntervalKind::Normal;
  } else if (interval == "percentile") {
    bo.interval = IntervalKind::Percentile;
  } else {
    throw ConfigError("interval must be 'normal' or 'percentile'");
  }
  Rng rng = Rng(c.seed).fork(2);
  const auto boot = semiparametric_bootstrap(d, model, test.X, tau, bo, rng);
  write_predictions(out / "predictions.csv", boot.predictions, true);
  json preds = json::array();
  for (const auto& q : boot.predictions) preds.push_back({q.point, q.lower, q.upper});
  result["n_test"] = boot.predictions.size();
  result["tau"] = tau;
  result["B"] = bo.B;
  result["successful_resamples"] = boot.replicates.cols();
  result["dropped"] = boot.dropped;
  result["warnings"] = boot.warnings;
  result["predictions"] = preds;
  result["diagnostics"] = train_diagnostics(model, d);
  return result;
}

// ---------------------------------------------------------------- c2

json run_c2(const RunConfig& c, const fs::path& out) {
  const json& p = c.params;
  const Table raw = io::read_csv(require_path(p, "input", "c2"), {{p.at("column").get<std::string>()}, {}});
  std::vector<double> y;
  for (double v : io::column(raw, p.at("column").get<std::string>())) {
    if (!std::isnan(v)) y.push_back(v);
  }
  ReturnSpec spec;
  spec.period_years = positive<double>(p, "T");
  spec.obs_per_year = positive<double>(p, "n_per_year");
  spec.n = y.size();
  const std::string conv = p.at("level_convention").get<std::string>();
  if (conv == "standard") {
    spec.convention = LevelConvention::Standard;
  } else if (conv == "include_sample") {
    spec.convention = LevelConvention::IncludeSample;
  } else {
    throw ConfigError("level_convention must be 'standard' or 'include_sample'");
  }
  CalibrationOptions opts;
  opts.k = p.at("k").get<std::size_t>();
  opts.threshold_quantile = probability(p, "threshold_quantile");
  opts.confidence = probability(p, "confidence");
  opts.shuffle = p.at("shuffle").get<bool>();
  Rng rng = Rng(c.seed).fork(1);
  const auto ft = calibrate_lambda(y, spec, opts, rng);

  json folds = json::array();
  for (const auto& f : ft.folds) {
    folds.push_back({{"index", f.index},
                     {"ok", f.ok},
                     {"ci", {f.ci.lower, f.ci.upper}},
                     {"point", f.ci.point},
                     {"argmin", f.argmin},
                     {"target", f.target},
                     {"lambda", f.lambda},
                     {"message", f.message}});
  }
  const auto surface = loss_surface(ft.ci, opts.loss, opts.grid_points);
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : surface) rows.push_back({format_double(s.q), format_double(s.expected_loss)});
  io::write_csv(out / "c2_loss_surface.csv", {"q", "expected_loss"}, rows);

  const auto grid = p.at("stability_grid").get<std::vector<double>>();
  const auto stab = threshold_stability(y, grid, opts.pot);
  rows.clear();
  for (const auto& s : stab) {
    rows.push_back({format_double(s.threshold_quantile), format_double(s.threshold), std::to_string(s.n_exceed),
                    s.ok ? "1" : "0", format_double(s.sigma), format_double(s.xi), format_double(s.modified_scale)});
  }
  io::write_csv(out / "c2_stability.csv",
                {"threshold_quantile", "threshold", "n_exceed", "ok", "sigma", "xi", "modified_scale"}, rows);

  return {{"n", y.size()},
          {"level", spec.level()},
          {"point", ft.q_op},
          {"classic", ft.ci.point},
          {"ci", {ft.ci.lower, ft.ci.upper}},
          {"argmin", ft.argmin},
          {"lambda_op", ft.lambda_op},
          {"lambdas", ft.lambdas},
          {"gpd", gpd_fit_json(ft.fit)},
          {"folds", folds},
          {"warnings", ft.warnings}};
}

// ---------------------------------------------------------------- c3

json dependence_json(const PairwiseDependence& pd) {
  return {{"u", pd.u}, {"n", pd.n}, {"chi", io::to_json(pd.chi)}, {"chibar", io::to_json(pd.chibar)}};
}

json run_c3(const RunConfig& c, const fs::path& out) {
  const json& p = c.params;
  const auto cols = p.at("columns").get<std::vector<std::string>>();
  if (cols.size() != 3) throw ConfigError("c3 needs exactly three response columns");
  // The season covariate may be text (for example S1, S2).
  io::CsvSchema schema{cols, {}};
  const std::string season_name = p.at("season_column").get<std::string>();
  const std::string atmosphere_name = p.at("atmosphere_column").get<std::string>();
  if (!season_name.empty()) schema.categorical.push_back(season_name);
  if (!atmosphere_name.empty()) schema.columns.push_back(atmosphere_name);
  const Table raw = io::read_csv(require_path(p, "input", "c3"), schema);

  // Rows with a missing response are left out.
  std::vector<std::size_t> complete;
  for (std::size_t t = 0; t < raw.rows(); ++t) {
    bool ok = true;
    for (const auto& name : cols) ok = ok && !std::isnan(raw.columns[static_cast<std::size_t>(raw.index_of(name))][t]);
    if (ok) complete.push_back(t);
  }
  const Eigen::MatrixXd data = take_rows(io::to_matrix(raw, cols), complete);
  const double u = probability(p, "u");

  const auto pd = chibar_matrix(data, u);
  const auto proj = nearest_psd(pd.chibar);
  const auto model = GaussianCopulaModel::from_correlation(proj.matrix);
  const auto thresholds = p.at("thresholds").get<std::vector<double>>();
  if (thresholds.size() != 3) throw ConfigError("c3 thresholds must have three entries");
  const auto draws = p.at("draws").get<std::uint64_t>();
  kernels::McPlan plan;
  plan.chunks = positive<std::size_t>(p, "chunks");
  const std::uint64_t p1_seed = derive_seed(c.seed, 1);
  const auto p1 = copula_joint_tail(model, thresholds, draws, p1_seed, plan);

  std::vector<double> y1(data.col(0).data(), data.col(0).data() + data.rows());
  std::vector<double> y2(data.col(1).data(), data.col(1).data() + data.rows());
  std::vector<double> y3(data.col(2).data(), data.col(2).data() + data.rows());
  const double tq = probability(p, "threshold_quantile");
  const auto p2 = estimate_p2(y1, y2, y3, p.at("p2_level").get<double>(), tq);

  const auto grid = p.at("curve_grid").get<std::vector<double>>();
  const auto c1 = p1_curve(data, model, grid, p.at("curve_draws").get<std::uint64_t>(), derive_seed(c.seed, 2));
  const auto c2 = p2_curve(y1, y2, y3, grid, tq);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rows.push_back({format_double(grid[i]), format_double(c1[i].empirical), format_double(c1[i].empirical_se),
                    format_double(c1[i].model), format_double(c1[i].model_se), format_double(c2[i].empirical),
                    format_double(c2[i].empirical_se), format_double(c2[i].model), format_double(c2[i].model_se)});
  }
  io::write_csv(out / "c3_curves.csv",
                {"y", "p1_empirical", "p1_empirical_se", "p1_model", "p1_model_se", "p2_empirical", "p2_empirical_se",
                 "p2_model", "p2_model_se"},
                rows);

  // Covariate subsets: chi and chibar within each subset.
  json subsets = json::array();
  auto subset_report = [&](const std::string& label, const std::vector<std::size_t>& rows_in) {
    json s = {{"label", label}, {"n", rows_in.size()}};
    try {
      std::vector<std::size_t> keep;
      for (std::size_t r : rows_in) keep.push_back(r);
      s["dependence"] = dependence_json(chibar_matrix(take_rows(data, keep), u));
    } catch (const std::exception& e) {
      s["error"] = e.what();
    }
    subsets.push_back(s);
  };
  auto covariate = [&](const std::string& key) -> std::optional<std::vector<double>> {
    const std::string name = p.at(key).get<std::string>();
    if (name.empty()) return std::nullopt;
    const auto col = io::column(raw, name);
    std::vector<double> v;
    for (std::size_t r : complete) v.push_back(col[r]);
    return v;
  };
  if (const auto season = covariate("season_column")) {
    std::vector<double> levels(season->begin(), season->end());
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    const auto& names = raw.labels.at(season_name);
    for (double lv : levels) {
      if (std::isnan(lv)) continue;
      subset_report("season=" + names[static_cast<std::size_t>(lv) - 1], rows_equal(*season, lv));
    }
  }
  if (const auto atm = covariate("atmosphere_column")) {
    const std::vector<double> cuts{0.3, 0.7};
    const auto bins = quantile_bins(*atm, cuts);
    const char* names[] = {"atmosphere_low", "atmosphere_mid", "atmosphere_high"};
    for (std::size_t b = 0; b < bins.size(); ++b) subset_report(names[b], bins[b]);
  }

  return {{"n", data.rows()},
          {"p1_hat", p1.p},
          {"p1_se", p1.se},
          {"p1_hits", p1.hits},
          {"p1_draws", p1.draws},
          {"p2_hat", p2.p},
          {"gpd_params", gpd_fit_json(p2.fit)},
          {"p2_threshold", p2.threshold},
          {"p2_n_conditional", p2.n_conditional},
          {"p2_stability", stability_json(p2.stability)},
          {"dependence", dependence_json(pd)},
          {"projected", proj.projected},
          {"min_eigenvalue_before", proj.min_eigenvalue_before},
          {"correlation", io::to_json(proj.matrix)},
          {"subsets", subsets}};
}

// ---------------------------------------------------------------- c4

json factors_json(const JointEstimate& e) {
  json a = json::array();
  for (const auto& f : e.clusters) {
    json sites = json::array();
    for (auto s : f.sites) sites.push_back(s + 1);
    json per = json::array();
    for (const auto& t : f.tail.per_p0) {
      per.push_back({{"p0", t.p0},
                     {"ok", t.ok},
                     {"quantile", t.quantile},
                     {"sigma", t.params.sigma},
                     {"xi", t.params.xi},
                     {"estimate", t.estimate},
                     {"message", t.message}});
    }
    a.push_back({{"cluster", f.cluster},
                 {"sites", sites},
                 {"mode", cluster_mode_name(f.mode)},
                 {"joint_count", f.joint_count},
                 {"probability", f.probability},
                 {"chi", f.chi},
                 {"chi_level", f.chi_level},
                 {"per_p0", per}});
  }
  return a;
}

json run_c4(const RunConfig& c, const fs::path& out) {
  const json& p = c.params;
  const Table raw = io::read_csv(require_path(p, "input", "c4"));
  auto cols = p.at("columns").get<std::vector<std::string>>();
  if (cols.empty()) cols = raw.names;
  const Eigen::MatrixXd data = io::to_matrix(raw, cols);
  if (data.hasNaN()) throw DataError("c4 site data must not contain missing values");
  const auto d = static_cast<std::size_t>(data.cols());
  if (d < 3) throw ConfigError("c4 needs at least three sites");

  const double u = probability(p, "u");
  const Linkage linkage = parse_linkage(p.at("linkage").get<std::string>());
  const auto vg = extremal_variogram(data, u);
  ClusterPartition part;
  const json& kj = p.at("k");
  if (kj.is_string()) {
    if (kj.get<std::string>() != "auto") throw ConfigError("k must be a positive integer or \"auto\"");
    part = hierarchical_cluster_auto(vg.gamma, linkage);
  } else {
    part = hierarchical_cluster(vg.gamma, kj.get<std::size_t>(), linkage);
  }

  JointConfig jc;
  jc.p0_grid = p.at("p0_grid").get<std::vector<double>>();
  jc.use_chi = p.at("use_chi").get<bool>();
  jc.extrapolate_all = p.at("extrapolate_all").get<bool>();
  const std::string scenario = p.at("scenario").get<std::string>();
  if (scenario != "both" && scenario != "i" && scenario != "ii") throw ConfigError("scenario must be i, ii or both");

  json result = {{"n", data.rows()}, {"d", d}, {"u", u}, {"linkage", linkage_name(linkage)}};
  json sites = json::array();
  for (auto a : part.assignment) sites.push_back(a);
  result["partition"] = {{"k", part.k}, {"assignment", sites}};

  std::vector<std::vector<std::string>> hist_rows;
  for (const auto sc : {Scenario::I, Scenario::II}) {
    const std::string name = scenario_name(sc);
    if (scenario != "both" && scenario != name) continue;
    ThresholdSpec ts = ThresholdSpec::halves(d, sc);
    ts.s1 = p.at("s1").get<double>();
    ts.s2 = p.at("s2").get<double>();
    const auto est = joint_probability(data, part, ts, jc);
    result[sc == Scenario::I ? "p1_hat" : "p2_hat"] = est.p;
    result["scenario_" + name] = {{"p", est.p}, {"clusters", factors_json(est)}};
    for (const auto& h : exceedance_histograms(data, part, ts)) {
      for (std::size_t m = 0; m < h.counts.size(); ++m) {
        hist_rows.push_back({name, std::to_string(h.cluster), std::to_string(m), std::to_string(h.counts[m])});
      }
    }
  }
  io::write_csv(out / "c4_histograms.csv", {"scenario", "cluster", "exceeding_sites", "rows"}, hist_rows);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t s = 0; s < part.merges.size(); ++s) {
    const auto& m = part.merges[s];
    rows.push_back({std::to_string(s + 1), std::to_string(m.a), std::to_string(m.b), format_double(m.height),
                    std::to_string(m.size)});
  }
  io::write_csv(out / "c4_dendrogram.csv", {"step", "a", "b", "height", "size"}, rows);

  rows.clear();
  for (std::size_t s = 0; s < d; ++s) rows.push_back({cols[s], std::to_string(part.assignment[s])});
  io::write_csv(out / "c4_partition.csv", {"site", "cluster"}, rows);

  const auto ugrid = p.at("scatter_u_grid").get<std::vector<double>>();
  rows.clear();
  for (const auto& sp : pair_scatter(data, ugrid)) {
    rows.push_back({format_double(sp.u), std::to_string(sp.i + 1), std::to_string(sp.j + 1), format_double(sp.chi),
                    format_double(sp.gamma)});
  }
  io::write_csv(out / "c4_scatter.csv", {"u", "i", "j", "chi", "gamma"}, rows);
  return result;
}

// ---------------------------------------------------------------- bench

SimFamily family_from_json(const json& f) {
  if (!f.is_object() || !f.contains("name")) throw ConfigError("bench family entries need a name");
  const Family tag = parse_family(f.at("name").get<std::string>());
  const auto params = f.value("params", std::vector<double>{});
  SimFamily s;
  switch (tag) {
    case Family::Frechet: s = SimFamily::frechet(params.size() > 0 ? params[0] : 2.0); break;
    case Family::Normal: s = SimFamily::normal(params.size() > 0 ? params[0] : 0.0, params.size() > 1 ? params[1] : 1.0); break;
    case Family::StudentT: s = SimFamily::student_t(params.size() > 0 ? params[0] : 4.0); break;
    case Family::Burr: s = SimFamily::burr(params.size() > 0 ? params[0] : 1.0, params.size() > 1 ? params[1] : 2.0); break;
    case Family::Gumbel: s = SimFamily::gumbel(params.size() > 0 ? params[0] : 0.0, params.size() > 1 ? params[1] : 1.0); break;
  }
  try {
    validate(s);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("bench family: ") + e.what());
  }
  return s;
}

json run_bench_task(const RunConfig& c, const fs::path& out) {
  const json& p = c.params;
  bench::BenchConfig bc;
  bc.families.clear();
  for (const auto& f : p.at("families")) bc.families.push_back(family_from_json(f));
  bc.sizes = p.at("sizes").get<std::vector<std::size_t>>();
  bc.replicates = p.at("replicates").get<std::size_t>();
  bc.period_years = positive<double>(p, "T");
  bc.obs_divisor = positive<double>(p, "obs_divisor");
  bc.k = p.at("k").get<std::size_t>();
  bc.threshold_quantile = probability(p, "threshold_quantile");
  bc.seed = c.seed;
  const auto report = bench::run_bench(bc);

  json rows = json::array();
  std::vector<std::vector<std::string>> csv;
  for (const auto& r : report.rows) {
    const std::string fam = family_name(r.family.tag);
    rows.push_back({{"family", fam},
                    {"params", {r.family.a, r.family.b}},
                    {"n", r.n},
                    {"replicates", r.replicates},
                    {"failures", r.failures},
                    {"true_quantile", r.true_quantile},
                    {"mean_loss_classic", r.mean_loss_classic},
                    {"se_classic", r.se_classic},
                    {"mean_loss_finetuned", r.mean_loss_finetuned},
                    {"se_finetuned", r.se_finetuned},
                    {"mean_lambda", r.mean_lambda}});
    csv.push_back({fam, std::to_string(r.n), std::to_string(r.replicates), std::to_string(r.failures),
                   format_double(r.true_quantile), format_double(r.mean_loss_classic), format_double(r.se_classic),
                   format_double(r.mean_loss_finetuned), format_double(r.se_finetuned), format_double(r.mean_lambda)});
  }
  io::write_csv(out / "bench.csv",
                {"family", "n", "replicates", "failures", "true_quantile", "mean_loss_classic", "se_classic",
                 "mean_loss_finetuned", "se_finetuned", "mean_lambda"},
                csv);
  return {{"rows", rows}};
}

// ---------------------------------------------------------------- fixture

json run_fixture(const RunConfig& c, const fs::path& out) {
  const json& p = c.params;
  Rng rng(c.seed);
  if (c.phase == "c1_synth") {
    fixtures::C1Options o;
    o.n = positive<std::size_t>(p, "n");
    o.n_test = positive<std::size_t>(p, "n_test");
    o.p = positive<std::size_t>(p, "p");
    o.variant = fixtures::parse_c1_variant(p.at("variant").get<std::string>());
    o.sigma0 = p.at("sigma0").get<double>();
    o.xi = p.at("xi").get<double>();
    o.missing_rate = p.at("missing_rate").get<double>();
    o.angle = p.at("angle").get<bool>();
    o.tau = p.at("tau").get<double>();
    const auto f = fixtures::make_c1(o, rng);
    io::write_csv(out / "c1_train.csv", f.train);
    io::write_csv(out / "c1_test.csv", f.test);
    io::write_csv(out / "c1_truth.csv", f.truth);
    return {{"files", {"c1_train.csv", "c1_test.csv", "c1_truth.csv"}},
            {"rows_with_missing", f.rows_with_missing},
            {"missing_row_rate", static_cast<double>(f.rows_with_missing) / static_cast<double>(o.n)}};
  }
  if (c.phase == "c3_trivariate") {
    fixtures::C3Options o;
    o.n = positive<std::size_t>(p, "n");
    o.rho = p.at("rho").get<double>();
    o.covariates = p.at("covariates").get<bool>();
    const auto thresholds = p.at("thresholds").get<std::vector<double>>();
    const double level = p.at("p2_level").get<double>();
    const Table t = fixtures::make_c3(o, rng);
    io::write_csv(out / "c3_data.csv", t);
    return {{"files", {"c3_data.csv"}},
            {"p1_true", fixtures::c3_p1_truth(o.rho, thresholds)},
            {"p2_true", fixtures::c3_p2_truth(o.rho, level)}};
  }
  fixtures::C4Options o;
  o.n = positive<std::size_t>(p, "n");
  o.block_size = positive<std::size_t>(p, "block_size");
  o.alpha = p.at("alpha").get<std::vector<double>>();
  const auto f = fixtures::make_c4(o, rng);
  io::write_csv(out / "c4_data.csv", fixtures::site_table(f.data));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t s = 0; s < f.partition.size(); ++s) {
    rows.push_back({"Y" + std::to_string(s + 1), std::to_string(f.partition[s])});
  }
  io::write_csv(out / "c4_partition_truth.csv", {"site", "cluster"}, rows);
  return {{"files", {"c4_data.csv", "c4_partition_truth.csv"}},
          {"truth_scenario_i", f.truth_scenario_i},
          {"truth_scenario_ii", f.truth_scenario_ii},
          {"block_truth_i", f.block_truth_i},
          {"block_truth_ii", f.block_truth_ii}};
}

// ---------------------------------------------------------------- model files

json mlp_json(const nn::Mlp& mlp, const Eigen::VectorXd& params) {
  return {{"layers", mlp.layer_sizes()}, {"params", io::to_vector(params)}};
}

nn::Mlp mlp_from(const json& j, Eigen::VectorXd& params) {
  const auto sizes = j.at("layers").get<std::vector<std::size_t>>();
  if (sizes.size() < 2) throw DataError("model file: a network needs at least two layers");
  nn::Mlp mlp(sizes.front(), std::vector<std::size_t>(sizes.begin() + 1, sizes.end() - 1), sizes.back());
  const auto v = j.at("params").get<std::vector<double>>();
  params = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  return mlp;
}

json qnet_json(const QuantileNetwork& q) {
  json j = mlp_json(q.mlp, q.params);
  j["y_center"] = q.y_center;
  j["y_scale"] = q.y_scale;
  return j;
}

QuantileNetwork qnet_from(const json& j) {
  QuantileNetwork q;
  q.mlp = mlp_from(j, q.params);
  if (static_cast<std::size_t>(q.params.size()) != q.mlp.parameter_count()) {
    throw DataError("model file: intermediate network has the wrong parameter count");
  }
  q.y_center = j.at("y_center").get<double>();
  q.y_scale = j.at("y_scale").get<double>();
  return q;
}

}  // namespace

// ---------------------------------------------------------------- public

json to_json(const RunConfig& c) {
  return {{"task", c.task}, {"phase", c.phase}, {"seed", c.seed}, {"threads", c.threads}, {"out_dir", c.out_dir},
          {"params", c.params}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> keys{"task", "phase", "seed", "threads", "out_dir", "params"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
      throw ConfigError("unknown config key '" + it.key() + "'");
    }
  }
  RunConfig c;
  try {
    c.task = j.value("task", std::string{});
    c.phase = j.value("phase", std::string{});
    c.seed = j.value("seed", std::uint64_t{1});
    c.threads = j.value("threads", 1);
    c.out_dir = j.value("out_dir", std::string{"out"});
    c.params = j.value("params", json::object());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

json default_params(const std::string& task, const std::string& phase) {
  if (task == "c1") return c1_defaults();
  if (task == "c2") return c2_defaults();
  if (task == "c3") return c3_defaults();
  if (task == "c4") return c4_defaults();
  if (task == "bench") return bench_defaults();
  if (task == "fixture") return fixture_defaults(phase);
  throw ConfigError("task must be one of c1, c2, c3, c4, bench, fixture; got '" + task + "'");
}

RunConfig resolve(const RunConfig& c) {
  RunConfig r = c;
  if (r.task == "c1") {
    if (r.phase != "train" && r.phase != "predict" && r.phase != "bootstrap") {
      throw ConfigError("c1 phase must be train, predict or bootstrap");
    }
  } else if (r.task != "fixture") {
    if (!r.phase.empty()) throw ConfigError(r.task + " takes no phase");
  }
  if (r.threads < 1) throw ConfigError("threads must be at least 1");
  r.params = merge_params(default_params(r.task, r.phase), c.params, r.task);
  return r;
}

std::string result_file_name(const RunConfig& c) {
  return c.phase.empty() ? c.task + ".json" : c.task + "_" + c.phase + ".json";
}

json run(const RunConfig& raw) {
  const RunConfig c = resolve(raw);
  omp_set_num_threads(c.threads);
  const fs::path out(c.out_dir);
  fs::create_directories(out);
  json result;
  try {
    if (c.task == "c1") {
      result = run_c1(c, out);
    } else if (c.task == "c2") {
      result = run_c2(c, out);
    } else if (c.task == "c3") {
      result = run_c3(c, out);
    } else if (c.task == "c4") {
      result = run_c4(c, out);
    } else if (c.task == "bench") {
      result = run_bench_task(c, out);
    } else {
      result = run_fixture(c, out);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("parameter error: ") + e.what());
  }
  result["config"] = to_json(c);
  io::write_json(out / result_file_name(c), result);
  return result;
}

json model_to_json(const TailRegressionModel& m, const Dataset& d) {
  json meta = json::array();
  for (const auto& f : d.feature_meta) {
    meta.push_back({{"name", f.name},
                    {"source", f.source},
                    {"is_angle", f.is_angle},
                    {"impute", f.impute},
                    {"mean", f.mean},
                    {"sd", f.sd}});
  }
  return {{"format", "tailrisk-c1-model"},
          {"version", 1},
          {"preparation",
           {{"response", d.response},
            {"raw_columns", d.raw_columns},
            {"angles_in_degrees", d.angles_in_degrees},
            {"features", meta}}},
          {"intermediate",
           {{"level", m.intermediate.level},
            {"final", qnet_json(m.intermediate.final_model)},
            {"oof_predictions", io::to_vector(m.intermediate.oof_predictions)},
            {"fold_of", m.intermediate.fold_of},
            {"folds", m.config.intermediate.folds},
            {"hidden", m.config.intermediate.hidden},
            {"l2", m.config.intermediate.l2},
            {"train", {{"learning_rate", m.config.intermediate.train.learning_rate},
                       {"batch_size", m.config.intermediate.train.batch_size},
                       {"max_epochs", m.config.intermediate.train.max_epochs},
                       {"patience", m.config.intermediate.train.patience},
                       {"validation_fraction", m.config.intermediate.train.validation_fraction}}}}},
          {"gpd",
           {{"network", mlp_json(m.gpd.mlp, m.gpd.params)},
            {"shape_mode", shape_mode_name(m.gpd.shape_mode)},
            {"hidden", m.config.gpd.hidden},
            {"l2", m.gpd.l2},
            {"nu_scale", m.gpd.nu_scale},
            {"q_mean", m.gpd.q_mean},
            {"q_sd", m.gpd.q_sd},
            {"train", {{"learning_rate", m.config.gpd.train.learning_rate},
                       {"batch_size", m.config.gpd.train.batch_size},
                       {"max_epochs", m.config.gpd.train.max_epochs},
                       {"patience", m.config.gpd.train.patience},
                       {"validation_fraction", m.config.gpd.train.validation_fraction}}}}}};
}

TailRegressionModel model_from_json(const json& j, Dataset& prep) {
  try {
    if (j.value("format", std::string{}) != "tailrisk-c1-model") throw DataError("not a c1 model file");
    const json& pj = j.at("preparation");
    prep = Dataset{};
    prep.response = pj.at("response").get<std::string>();
    prep.raw_columns = pj.at("raw_columns").get<std::vector<std::string>>();
    prep.angles_in_degrees = pj.at("angles_in_degrees").get<bool>();
    for (const auto& f : pj.at("features")) {
      prep.feature_meta.push_back({f.at("name").get<std::string>(), f.at("source").get<std::string>(),
                                   f.at("is_angle").get<bool>(), f.at("impute").get<double>(),
                                   f.at("mean").get<double>(), f.at("sd").get<double>()});
    }

    auto train_opts = [](const json& t) {
      nn::TrainOptions o;
      o.learning_rate = t.at("learning_rate").get<double>();
      o.batch_size = t.at("batch_size").get<std::size_t>();
      o.max_epochs = t.at("max_epochs").get<std::size_t>();
      o.patience = t.at("patience").get<std::size_t>();
      o.validation_fraction = t.at("validation_fraction").get<double>();
      return o;
    };

    TailRegressionModel m;
    const json& ij = j.at("intermediate");
    m.intermediate.level = ij.at("level").get<double>();
    m.intermediate.final_model = qnet_from(ij.at("final"));
    const auto oof = ij.at("oof_predictions").get<std::vector<double>>();
    m.intermediate.oof_predictions = Eigen::Map<const Eigen::VectorXd>(oof.data(), static_cast<Eigen::Index>(oof.size()));
    m.intermediate.fold_of = ij.at("fold_of").get<std::vector<std::size_t>>();
    m.config.intermediate.level = m.intermediate.level;
    m.config.intermediate.folds = ij.at("folds").get<std::size_t>();
    m.config.intermediate.hidden = ij.at("hidden").get<std::vector<std::size_t>>();
    m.config.intermediate.l2 = ij.at("l2").get<double>();
    m.config.intermediate.train = train_opts(ij.at("train"));

    const json& gj = j.at("gpd");
    m.gpd.mlp = mlp_from(gj.at("network"), m.gpd.params);
    m.gpd.shape_mode = parse_shape_mode(gj.at("shape_mode").get<std::string>());
    const std::size_t expected =
        m.gpd.mlp.parameter_count() + (m.gpd.shape_mode == ShapeMode::Constant ? 1 : 0);
    if (static_cast<std::size_t>(m.gpd.params.size()) != expected) {
      throw DataError("model file: GPD network has the wrong parameter count");
    }
    m.gpd.l2 = gj.at("l2").get<double>();
    m.gpd.nu_scale = gj.at("nu_scale").get<double>();
    m.gpd.q_mean = gj.at("q_mean").get<double>();
    m.gpd.q_sd = gj.at("q_sd").get<double>();
    m.config.gpd.hidden = gj.at("hidden").get<std::vector<std::size_t>>();
    m.config.gpd.l2 = m.gpd.l2;
    m.config.gpd.shape_mode = m.gpd.shape_mode;
    m.config.gpd.train = train_opts(gj.at("train"));
    if (m.gpd.mlp.inputs() != prep.feature_meta.size() + 1) {
      throw DataError("model file: GPD network input size does not match the features");
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

}  // namespace tailrisk::tasks
