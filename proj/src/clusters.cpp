#include "tailrisk/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tailrisk/dependence.hpp"
#include "tailrisk/errors.hpp"
#include "tailrisk/kernels.hpp"
#include "tailrisk/return_levels.hpp"

namespace tailrisk {
namespace {

struct RankedData {
  Eigen::MatrixXd log_survival;
  std::vector<std::vector<double>> ranks;
};

RankedData rank_columns(const Eigen::MatrixXd& data) {
  const auto n = static_cast<std::size_t>(data.rows());
  const Eigen::Index d = data.cols();
  RankedData r;
  r.log_survival.resize(data.rows(), d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto col = data.col(j);
    std::vector<double> v(col.data(), col.data() + n);
    auto f = empirical_cdf_ranks(v);
    for (std::size_t t = 0; t < n; ++t) r.log_survival(static_cast<Eigen::Index>(t), j) = std::log1p(-f[t]);
    r.ranks.push_back(std::move(f));
  }
  return r;
}

std::vector<std::size_t> rows_above(const std::vector<double>& f, double u) {
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < f.size(); ++t) {
    if (f[t] > u) rows.push_back(t);
  }
  return rows;
}

void check_variogram_input(const Eigen::MatrixXd& data, double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("threshold probability must lie in (0, 1)");
  if ((1.0 - u) * static_cast<double>(data.rows()) < 20.0) throw DomainError("(1 - u) n must be at least 20");
  if (data.cols() < 1) throw DomainError("no columns");
}

}  // namespace

ExtremalVariogram extremal_variogram(const Eigen::MatrixXd& data, double u) {
  check_variogram_input(data, u);
  const RankedData r = rank_columns(data);
  std::vector<std::vector<std::size_t>> roots;
  for (std::size_t m = 0; m < r.ranks.size(); ++m) {
    roots.push_back(rows_above(r.ranks[m], u));
    if (roots.back().empty()) throw EstimationError("root " + std::to_string(m + 1) + " has no rows above u");
  }
  return {kernels::variogram_parallel(r.log_survival, roots), u, std::nullopt};
}

ExtremalVariogram extremal_variogram_rooted(const Eigen::MatrixXd& data, double u, std::size_t root) {
  check_variogram_input(data, u);
  if (root >= static_cast<std::size_t>(data.cols())) throw DomainError("root index out of range");
  const RankedData r = rank_columns(data);
  std::vector<std::vector<std::size_t>> roots{rows_above(r.ranks[root], u)};
  if (roots[0].empty()) throw EstimationError("root " + std::to_string(root + 1) + " has no rows above u");
  return {kernels::variogram_serial(r.log_survival, roots), u, root};
}

std::string linkage_name(Linkage l) { return l == Linkage::Average ? "average" : "complete"; }

Linkage parse_linkage(const std::string& s) {
  if (s == "average") return Linkage::Average;
  if (s == "complete") return Linkage::Complete;
  throw ConfigError("linkage must be 'average' or 'complete', got '" + s + "'");
}

std::vector<std::vector<std::size_t>> ClusterPartition::members() const {
  std::vector<std::vector<std::size_t>> m(k);
  for (std::size_t i = 0; i < assignment.size(); ++i) m[assignment[i] - 1].push_back(i);
  return m;
}

ClusterPartition hierarchical_cluster(const Eigen::MatrixXd& dissim, std::size_t k, Linkage linkage) {
  const auto d = static_cast<std::size_t>(dissim.rows());
  if (dissim.cols() != dissim.rows() || d == 0) throw DomainError("dissimilarity must be square and nonempty");
  if (dissim.hasNaN()) throw DataError("dissimilarity has NaN entries");
  if (k < 1 || k > d) throw DomainError("k must lie in [1, d]");
  for (std::size_t i = 0; i < d; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (dissim(ii, ii) != 0.0) throw DomainError("dissimilarity must have a zero diagonal");
    for (std::size_t j = 0; j < d; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (dissim(ii, jj) < 0.0) throw DomainError("dissimilarity must be nonnegative");
      if (dissim(ii, jj) != dissim(jj, ii)) throw DomainError("dissimilarity must be symmetric");
    }
  }

  // Active clusters: node id, member sites, and the working distance matrix.
  Eigen::MatrixXd dist = dissim;
  std::vector<std::size_t> node(d);
  std::vector<std::vector<std::size_t>> sites(d);
  std::vector<bool> active(d, true);
  for (std::size_t i = 0; i < d; ++i) {
    node[i] = i;
    sites[i] = {i};
  }
  ClusterPartition part;
  std::vector<std::size_t> label_at_cut;
  auto record_cut = [&]() {
    label_at_cut.assign(d, 0);
    std::size_t c = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (!active[i]) continue;
      for (std::size_t s : sites[i]) label_at_cut[s] = c;
      ++c;
    }
  };
  if (k == d) record_cut();
  for (std::size_t step = 0; step + 1 < d; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < d; ++j) {
        if (!active[j]) continue;
        const double v = dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    const double ni = static_cast<double>(sites[bi].size());
    const double nj = static_cast<double>(sites[bj].size());
    for (std::size_t m = 0; m < d; ++m) {
      if (!active[m] || m == bi || m == bj) continue;
      const auto mm = static_cast<Eigen::Index>(m);
      const double a = dist(static_cast<Eigen::Index>(bi), mm);
      const double b = dist(static_cast<Eigen::Index>(bj), mm);
      const double v = linkage == Linkage::Average ? (ni * a + nj * b) / (ni + nj) : std::max(a, b);
      dist(static_cast<Eigen::Index>(bi), mm) = dist(mm, static_cast<Eigen::Index>(bi)) = v;
    }
    part.merges.push_back({std::min(node[bi], node[bj]), std::max(node[bi], node[bj]), best,
                           sites[bi].size() + sites[bj].size()});
    sites[bi].insert(sites[bi].end(), sites[bj].begin(), sites[bj].end());
    std::sort(sites[bi].begin(), sites[bi].end());
    sites[bj].clear();
    active[bj] = false;
    node[bi] = d + step;
    if (d - (step + 1) == k) record_cut();
  }
  // Renumber so that clusters are ordered by their smallest site.
  std::map<std::size_t, std::size_t> relabel;
  part.assignment.resize(d);
  for (std::size_t s = 0; s < d; ++s) {
    auto it = relabel.find(label_at_cut[s]);
    if (it == relabel.end()) it = relabel.emplace(label_at_cut[s], relabel.size() + 1).first;
    part.assignment[s] = it->second;
  }
  part.k = k;
  return part;
}

std::size_t choose_k_by_gap(const std::vector<Merge>& merges) {
  const std::size_t d = merges.size() + 1;
  if (d < 3) throw DomainError("automatic k needs at least three sites");
  std::size_t best_k = 2;
  double best_gap = -1.0;
  for (std::size_t k = 2; k + 1 <= d; ++k) {
    // Cutting at k clusters performs merges 1..d-k; the next one would make k-1.
    const double prev = merges[d - k - 1].height;
    const double next = merges[d - k].height;
    const double gap = next > 0.0 ? (next - prev) / next : 0.0;
    if (gap > best_gap) {
      best_gap = gap;
      best_k = k;
    }
  }
  return best_k;
}

ClusterPartition hierarchical_cluster_auto(const Eigen::MatrixXd& dissim, Linkage linkage) {
  const ClusterPartition full = hierarchical_cluster(dissim, 1, linkage);
  return hierarchical_cluster(dissim, choose_k_by_gap(full.merges), linkage);
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size() || a.empty()) throw DomainError("labelings must have equal, nonzero length");
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::map<std::size_t, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, v] : table) sum_ij += c2(v);
  for (const auto& [key, v] : ra) sum_a += c2(v);
  for (const auto& [key, v] : rb) sum_b += c2(v);
  const double total = c2(static_cast<double>(a.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both labelings trivial
  return (sum_ij - expected) / (max_index - expected);
}

std::string scenario_name(Scenario s) { return s == Scenario::I ? "i" : "ii"; }

Scenario parse_scenario(const std::string& s) {
  if (s == "i" || s == "1") return Scenario::I;
  if (s == "ii" || s == "2") return Scenario::II;
  throw ConfigError("scenario must be 'i' or 'ii', got '" + s + "'");
}

ThresholdSpec ThresholdSpec::halves(std::size_t d, Scenario scenario) {
  ThresholdSpec t;
  t.scenario = scenario;
  t.region.resize(d);
  for (std::size_t i = 0; i < d; ++i) t.region[i] = i < d / 2 ? 1 : 2;
  return t;
}

std::size_t ThresholdSpec::index(std::size_t site) const {
  if (site >= region.size()) throw DomainError("site outside the threshold specification");
  if (scenario == Scenario::II) return 0;
  return region[site] == 1 ? 0 : 1;
}

namespace {

void check_partition(const Eigen::MatrixXd& data, const ClusterPartition& p, const ThresholdSpec& t) {
  const auto d = static_cast<std::size_t>(data.cols());
  if (p.assignment.size() != d) throw DomainError("partition does not cover the data columns");
  if (t.region.size() != d) throw DomainError("threshold specification does not cover the data columns");
  for (std::size_t c : p.assignment) {
    if (c < 1 || c > p.k) throw DomainError("cluster id out of range");
  }
}

}  // namespace

std::vector<MinimaSeries> cluster_minima(const Eigen::MatrixXd& data, const ClusterPartition& partition,
                                         const ThresholdSpec& thresholds) {
  check_partition(data, partition, thresholds);
  const auto members = partition.members();
  std::vector<MinimaSeries> out;
  for (std::size_t j = 0; j < members.size(); ++j) {
    for (std::size_t l = 0; l < 2; ++l) {
      MinimaSeries s;
      s.cluster = j + 1;
      s.threshold_index = l;
      s.threshold = thresholds.value(l);
      for (std::size_t site : members[j]) {
        if (thresholds.index(site) == l) s.sites.push_back(site);
      }
      if (s.sites.empty()) continue;
      s.values.assign(static_cast<std::size_t>(data.rows()), std::numeric_limits<double>::infinity());
      for (std::size_t t = 0; t < s.values.size(); ++t) {
        for (std::size_t site : s.sites) {
          s.values[t] = std::min(s.values[t], data(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(site)));
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::size_t joint_exceedance_count(const Eigen::MatrixXd& data, std::span<const std::size_t> sites,
                                   const ThresholdSpec& thresholds) {
  std::size_t count = 0;
  for (Eigen::Index t = 0; t < data.rows(); ++t) {
    bool all = true;
    for (std::size_t s : sites) {
      if (!(data(t, static_cast<Eigen::Index>(s)) > thresholds.at(s))) {
        all = false;
        break;
      }
    }
    count += all ? 1 : 0;
  }
  return count;
}

std::optional<double> empirical_joint_exceedance(const Eigen::MatrixXd& data, std::span<const std::size_t> sites,
                                                 const ThresholdSpec& thresholds) {
  if (data.rows() == 0) throw DomainError("no observations");
  const std::size_t c = joint_exceedance_count(data, sites, thresholds);
  if (c == 0) return std::nullopt;
  return static_cast<double>(c) / static_cast<double>(data.rows());
}

std::vector<double> default_p0_grid() {
  std::vector<double> g;
  for (int k = 90; k <= 99; ++k) g.push_back(k / 100.0);
  return g;
}

TailEstimate cluster_tail_probability(std::span<const double> minima, double s, std::span<const double> p0_grid) {
  if (minima.empty()) throw DomainError("empty minima series");
  if (p0_grid.empty()) throw ConfigError("empty p0 grid");
  std::vector<double> sorted(minima.begin(), minima.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double above_s =
      static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), s)) / n;
  TailEstimate est;
  double total = 0.0;
  std::size_t ok = 0;
  for (double p0 : p0_grid) {
    TailFitAtP0 f;
    f.p0 = p0;
    try {
      if (!(p0 > 0.0 && p0 < 1.0)) throw DomainError("p0 must lie in (0, 1)");
      f.quantile = empirical_quantile_sorted(sorted, p0);
      if (s <= f.quantile) {
        f.estimate = above_s;
      } else {
        const GpdFit fit = fit_pot_at(sorted, f.quantile);
        f.params = fit.params;
        const double x = s - f.quantile;
        f.estimate = (1.0 - p0) * (gpd_in_support(x, fit.params) ? gpd_survival(x, fit.params) : 0.0);
      }
      f.ok = true;
      total += f.estimate;
      ++ok;
    } catch (const std::exception& e) {
      f.message = e.what();
    }
    est.per_p0.push_back(f);
  }
  if (ok == 0) throw EstimationError("tail fit failed at every p0");
  est.p = total / static_cast<double>(ok);
  return est;
}

std::string cluster_mode_name(ClusterMode m) {
  switch (m) {
    case ClusterMode::Empirical: return "empirical";
    case ClusterMode::GpdUnivariate: return "gpd_univariate";
    case ClusterMode::GpdBivariateChi: return "gpd_bivariate_chi";
  }
  return "unknown";
}

JointEstimate joint_probability(const Eigen::MatrixXd& data, const ClusterPartition& partition,
                                const ThresholdSpec& thresholds, const JointConfig& config) {
  check_partition(data, partition, thresholds);
  const auto members = partition.members();
  const auto minima = cluster_minima(data, partition, thresholds);
  const double n = static_cast<double>(data.rows());
  JointEstimate out;
  out.p = 1.0;
  for (std::size_t j = 0; j < members.size(); ++j) {
    ClusterFactor f;
    f.cluster = j + 1;
    f.sites = members[j];
    f.joint_count = joint_exceedance_count(data, f.sites, thresholds);
    try {
      if (f.joint_count > 0 && !config.extrapolate_all) {
        f.mode = ClusterMode::Empirical;
        f.probability = static_cast<double>(f.joint_count) / n;
      } else {
        std::vector<const MinimaSeries*> series;
        for (const auto& m : minima) {
          if (m.cluster == f.cluster) series.push_back(&m);
        }
        if (series.size() == 1) {
          f.mode = ClusterMode::GpdUnivariate;
          f.tail = cluster_tail_probability(series[0]->values, series[0]->threshold, config.p0_grid);
          f.probability = f.tail.p;
        } else {
          f.mode = ClusterMode::GpdBivariateChi;
          const MinimaSeries* hi = series[0]->threshold >= series[1]->threshold ? series[0] : series[1];
          const MinimaSeries* lo = hi == series[0] ? series[1] : series[0];
          f.tail = cluster_tail_probability(hi->values, hi->threshold, config.p0_grid);
          // Rank level of the lower threshold in the distribution of the higher-threshold minima.
          const double below = static_cast<double>(
              std::count_if(hi->values.begin(), hi->values.end(), [&](double v) { return v <= lo->threshold; }));
          f.chi_level = std::clamp(below / n, 0.01, 1.0 - 20.0 / n);
          f.chi = config.use_chi ? chi_u(hi->values, lo->values, f.chi_level) : 1.0;
          f.probability = f.tail.p * f.chi;
        }
      }
    } catch (const EstimationError& e) {
      throw EstimationError("cluster " + std::to_string(f.cluster) + ": " + e.what());
    } catch (const DomainError& e) {
      throw DomainError("cluster " + std::to_string(f.cluster) + ": " + e.what());
    }
    out.p *= f.probability;
    out.clusters.push_back(std::move(f));
  }
  return out;
}

std::vector<ExceedanceHistogram> exceedance_histograms(const Eigen::MatrixXd& data, const ClusterPartition& partition,
                                                       const ThresholdSpec& thresholds) {
  check_partition(data, partition, thresholds);
  std::vector<ExceedanceHistogram> out;
  const auto members = partition.members();
  for (std::size_t j = 0; j < members.size(); ++j) {
    ExceedanceHistogram h;
    h.cluster = j + 1;
    h.counts.assign(members[j].size() + 1, 0);
    for (Eigen::Index t = 0; t < data.rows(); ++t) {
      std::size_t m = 0;
      for (std::size_t s : members[j]) m += data(t, static_cast<Eigen::Index>(s)) > thresholds.at(s) ? 1 : 0;
      ++h.counts[m];
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::vector<PairScatterPoint> pair_scatter(const Eigen::MatrixXd& data, std::span<const double> u_grid) {
  const auto d = static_cast<std::size_t>(data.cols());
  const RankedData r = rank_columns(data);
  std::vector<PairScatterPoint> out;
  for (double u : u_grid) {
    const ExtremalVariogram g = extremal_variogram(data, u);
    std::vector<std::vector<std::uint8_t>> exceed(d);
    for (std::size_t j = 0; j < d; ++j) {
      exceed[j].resize(r.ranks[j].size());
      for (std::size_t t = 0; t < exceed[j].size(); ++t) exceed[j][t] = r.ranks[j][t] > u ? 1 : 0;
    }
    const auto counts = kernels::pairwise_joint_counts_parallel(exceed);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) {
        const double mi = static_cast<double>(counts[i * d + i]);
        const double mj = static_cast<double>(counts[j * d + j]);
        const double chi = mi > 0 && mj > 0 ? static_cast<double>(counts[i * d + j]) / std::sqrt(mi * mj) : 0.0;
        out.push_back({u, i, j, chi, g.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
      }
    }
  }
  return out;
}

}  // namespace tailrisk
