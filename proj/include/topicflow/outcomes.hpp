#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "topicflow/common.hpp"
#include "topicflow/corpus.hpp"
#include "topicflow/embedding.hpp"
#include "topicflow/log.hpp"
#include "topicflow/metrics.hpp"
#include "topicflow/parallel.hpp"

namespace topicflow {

using FirmYear = std::pair<std::string, int>;

// ---------------------------------------------------------------------------
// Frequencies

struct FrequencyMatrix {
  std::vector<FirmYear> rows;
  std::vector<int> topic_ids;
  Matrix f;                            // rows x topics, each entry in [0, 1]
  std::vector<int> post_counts;        // denominator per row
  std::vector<bool> included;          // post_count >= threshold
  std::map<int, std::size_t> topic_posts;  // posts assigned to each topic
  int threshold = 0;

  std::size_t n_included() const { return std::count(included.begin(), included.end(), true); }
};

struct UnmappedPassage : DataError {
  explicit UnmappedPassage(const std::string& id) : DataError("passage has no firm-year mapping: " + id) {}
};

// `topics` maps topic id to member passage ids.  The denominator of a row is
// the number of `passages` from that firm-year unless `post_counts` supplies
// another total (for example all posts of the firm-year across slices).
inline FrequencyMatrix aggregate_frequencies(const std::map<int, std::set<std::string>>& topics,
                                             const std::vector<LeaderPassage>& passages, int threshold,
                                             const std::map<FirmYear, int>* post_counts = nullptr) {
  std::map<std::string, FirmYear> where;
  std::map<FirmYear, int> totals;
  for (const auto& p : passages) {
    if (p.firm_id.empty()) continue;
    where[p.passage_id] = {p.firm_id, p.year};
    ++totals[{p.firm_id, p.year}];
  }
  if (post_counts) {
    for (const auto& [fy, n] : totals) {
      auto it = post_counts->find(fy);
      if (it == post_counts->end() || it->second < n)
        throw DataError("post count for " + fy.first + "/" + std::to_string(fy.second) + " is below its passage count");
    }
    totals = *post_counts;
  }
  FrequencyMatrix m;
  m.threshold = threshold;
  std::map<FirmYear, std::size_t> row_of;
  for (const auto& [fy, n] : totals) {
    row_of[fy] = m.rows.size();
    m.rows.push_back(fy);
    m.post_counts.push_back(n);
    m.included.push_back(n >= threshold);
  }
  for (const auto& [id, members] : topics) m.topic_ids.push_back(id);
  m.f = Matrix::Zero(static_cast<Eigen::Index>(m.rows.size()), static_cast<Eigen::Index>(m.topic_ids.size()));
  for (std::size_t k = 0; k < m.topic_ids.size(); ++k) {
    const auto& members = topics.at(m.topic_ids[k]);
    m.topic_posts[m.topic_ids[k]] = members.size();
    for (const auto& id : members) {
      auto it = where.find(id);
      if (it == where.end()) throw UnmappedPassage(id);
      m.f(row_of.at(it->second), k) += 1.0;
    }
  }
  for (std::size_t r = 0; r < m.rows.size(); ++r)
    if (m.post_counts[r] > 0) m.f.row(r) /= static_cast<double>(m.post_counts[r]);
  return m;
}

// ---------------------------------------------------------------------------
// Outcomes

enum class OutcomeKind { roa, morale };

inline std::string to_string(OutcomeKind k) { return k == OutcomeKind::roa ? "roa" : "morale"; }

inline OutcomeKind parse_outcome(const std::string& s) {
  if (s == "roa") return OutcomeKind::roa;
  if (s == "morale") return OutcomeKind::morale;
  throw ConfigError("unknown outcome: " + s);
}

struct OutcomeVector {
  Vector values;
  OutcomeKind kind = OutcomeKind::roa;
  bool demeaned = false;
  std::vector<FirmYear> rows;
  std::size_t singleton_groups = 0;
};

inline double outcome_value(const PanelRow& r, OutcomeKind k) { return k == OutcomeKind::roa ? r.roa : r.morale; }

inline OutcomeVector demean_by_year_industry(const std::vector<PanelRow>& panel, OutcomeKind kind) {
  std::map<std::pair<int, std::string>, std::pair<double, int>> groups;
  for (const auto& r : panel) {
    if (r.industry.empty()) throw DataError("panel row " + r.firm_id + "/" + std::to_string(r.year) + " has no industry");
    auto& g = groups[{r.year, r.industry}];
    g.first += outcome_value(r, kind);
    ++g.second;
  }
  OutcomeVector out;
  out.kind = kind;
  out.demeaned = true;
  out.values.resize(static_cast<Eigen::Index>(panel.size()));
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto& g = groups.at({panel[i].year, panel[i].industry});
    out.values(i) = outcome_value(panel[i], kind) - g.first / g.second;
    out.rows.emplace_back(panel[i].firm_id, panel[i].year);
  }
  for (const auto& [key, g] : groups) out.singleton_groups += g.second == 1;
  return out;
}

// Firm-years present in both the frequency matrix (included rows only) and
// the panel, in frequency-row order.
struct OutcomeDesign {
  std::vector<FirmYear> rows;
  Matrix f;          // topic frequencies
  Vector log_employees;
  std::map<OutcomeKind, Vector> y;  // demeaned over the full panel
  std::vector<std::string> firms;
  std::vector<int> topic_ids;
};

inline OutcomeDesign build_design(const FrequencyMatrix& freq, const std::vector<PanelRow>& panel) {
  std::map<FirmYear, std::size_t> panel_row;
  for (std::size_t i = 0; i < panel.size(); ++i)
    if (!panel_row.emplace(FirmYear{panel[i].firm_id, panel[i].year}, i).second)
      throw DataError("duplicate panel row " + panel[i].firm_id + "/" + std::to_string(panel[i].year));
  std::map<OutcomeKind, OutcomeVector> outcomes{{OutcomeKind::roa, demean_by_year_industry(panel, OutcomeKind::roa)},
                                                {OutcomeKind::morale, demean_by_year_industry(panel, OutcomeKind::morale)}};
  std::vector<std::size_t> keep, prow;
  for (std::size_t r = 0; r < freq.rows.size(); ++r) {
    if (!freq.included[r]) continue;
    auto it = panel_row.find(freq.rows[r]);
    if (it == panel_row.end()) continue;
    keep.push_back(r);
    prow.push_back(it->second);
  }
  OutcomeDesign d;
  d.topic_ids = freq.topic_ids;
  const auto n = static_cast<Eigen::Index>(keep.size());
  d.f.resize(n, freq.f.cols());
  d.log_employees.resize(n);
  for (auto& [k, v] : outcomes) d.y[k].resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.rows.push_back(freq.rows[keep[i]]);
    d.firms.push_back(freq.rows[keep[i]].first);
    d.f.row(i) = freq.f.row(keep[i]);
    const auto& p = panel[prow[i]];
    if (p.employees <= 0) throw DataError("non-positive employee count for " + p.firm_id);
    d.log_employees(i) = std::log(static_cast<double>(p.employees));
    for (auto& [k, v] : outcomes) d.y[k](i) = v.values(prow[i]);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Elastic net

struct ElasticNetOptions {
  int cv_folds = 5;
  std::vector<double> l1_ratios{0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0};
  std::vector<double> alphas;  // empty: automatic grid per l1 ratio
  int n_alphas = 100;
  double alpha_min_ratio = 1e-3;
  int max_iter = 10000;
  double tol = 1e-7;
  std::uint64_t seed = 0;
};

struct ElasticNetModel {
  Vector coef;  // original scale
  double intercept = 0.0;
  double alpha = 0.0;
  double l1_ratio = 1.0;
  double cv_mse = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = true;
  double max_update = 0.0;  // last sweep's largest coefficient change

  Vector predict(const Matrix& X) const { return (X * coef).array() + intercept; }
};

namespace detail {

struct Standardized {
  Matrix X;
  Vector y;
  Vector x_mean, x_scale;
  double y_mean = 0.0;
};

inline Standardized standardize(const Matrix& X, const Vector& y) {
  Standardized s;
  const double n = static_cast<double>(X.rows());
  s.x_mean = X.colwise().mean().transpose();
  s.X = X.rowwise() - s.x_mean.transpose();
  s.x_scale = (s.X.colwise().squaredNorm().array() / n).sqrt().matrix().transpose();
  for (Eigen::Index j = 0; j < s.X.cols(); ++j) {
    if (s.x_scale(j) <= 1e-300) {
      s.x_scale(j) = 1.0;
      s.X.col(j).setZero();
    } else {
      s.X.col(j) /= s.x_scale(j);
    }
  }
  s.y_mean = y.mean();
  s.y = y.array() - s.y_mean;
  return s;
}

inline double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

// Coordinate descent on standardized columns (each with squared norm n or 0).
// `beta` is the warm start and receives the solution.
inline void coordinate_descent(const Matrix& X, const Vector& y, double alpha, double l1_ratio, Vector& beta,
                               int max_iter, double tol, int& iterations, bool& converged, double& max_update) {
  const double n = static_cast<double>(X.rows());
  const Eigen::Index p = X.cols();
  Vector col_sq = X.colwise().squaredNorm().transpose() / n;
  Vector r = y - X * beta;
  const double l1 = alpha * l1_ratio, l2 = alpha * (1.0 - l1_ratio);
  converged = false;
  for (iterations = 1; iterations <= max_iter; ++iterations) {
    max_update = 0.0;
    double max_beta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq(j) == 0.0) {
        beta(j) = 0.0;
        continue;
      }
      const double old = beta(j);
      const double rho = X.col(j).dot(r) / n + col_sq(j) * old;
      const double updated = soft_threshold(rho, l1) / (col_sq(j) + l2);
      if (updated != old) {
        r -= (updated - old) * X.col(j);
        beta(j) = updated;
      }
      max_update = std::max(max_update, std::abs(updated - old));
      max_beta = std::max(max_beta, std::abs(updated));
    }
    if (max_update <= tol * std::max(1.0, max_beta)) {
      converged = true;
      return;
    }
  }
  iterations = max_iter;
}

inline std::vector<double> alpha_grid(const Standardized& s, double l1_ratio, int n_alphas, double min_ratio) {
  if (l1_ratio <= 0.0) throw ConfigError("automatic alpha grid needs l1_ratio > 0");
  const double n = static_cast<double>(s.X.rows());
  double alpha_max = (s.X.transpose() * s.y).cwiseAbs().maxCoeff() / (n * l1_ratio);
  if (alpha_max <= 0.0) alpha_max = 1e-12;
  std::vector<double> grid(static_cast<std::size_t>(n_alphas));
  if (n_alphas == 1) return {alpha_max};
  for (int i = 0; i < n_alphas; ++i)
    grid[i] = alpha_max * std::pow(min_ratio, static_cast<double>(i) / (n_alphas - 1));
  return grid;
}

inline ElasticNetModel fit_fixed(const Matrix& X, const Vector& y, double alpha, double l1_ratio,
                                 const ElasticNetOptions& opt, Vector* warm = nullptr) {
  auto s = standardize(X, y);
  Vector beta = warm && warm->size() == X.cols() ? *warm : Vector::Zero(X.cols());
  ElasticNetModel m;
  m.alpha = alpha;
  m.l1_ratio = l1_ratio;
  coordinate_descent(s.X, s.y, alpha, l1_ratio, beta, opt.max_iter, opt.tol, m.iterations, m.converged, m.max_update);
  if (warm) *warm = beta;
  m.coef = beta.cwiseQuotient(s.x_scale);
  m.intercept = s.y_mean - s.x_mean.dot(m.coef);
  return m;
}

}  // namespace detail

// Minimizes (1/2n)|y - Xb|^2 + alpha (rho |b|_1 + (1 - rho)/2 |b|^2) on
// standardized columns with (alpha, rho) chosen by k-fold CV on MSE.
inline ElasticNetModel elastic_net_fit(const Matrix& X, const Vector& y, const ElasticNetOptions& opt = {}) {
  const auto n = X.rows();
  if (y.size() != n) throw DataError("design and outcome lengths differ");
  if (opt.cv_folds < 2 || n <= opt.cv_folds) throw ConfigError("elastic net needs rows > cv_folds >= 2");
  if (opt.l1_ratios.empty()) throw ConfigError("l1_ratios must not be empty");
  for (double r : opt.l1_ratios)
    if (r < 0.0 || r > 1.0) throw ConfigError("l1_ratio outside [0, 1]");
  if (!X.allFinite() || !y.allFinite()) throw DataError("elastic net input contains non-finite values");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opt.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) fold[order[i]] = static_cast<int>(i % opt.cv_folds);

  const auto full = detail::standardize(X, y);
  struct Candidate {
    double alpha, l1_ratio, mse;
  };
  std::optional<Candidate> best;
  bool all_converged = true;
  for (double rho : opt.l1_ratios) {
    auto grid = opt.alphas.empty() ? detail::alpha_grid(full, rho, opt.n_alphas, opt.alpha_min_ratio) : opt.alphas;
    std::sort(grid.begin(), grid.end(), std::greater<>());
    std::vector<double> mse(grid.size(), 0.0);
    for (int k = 0; k < opt.cv_folds; ++k) {
      std::vector<Eigen::Index> tr, te;
      for (Eigen::Index i = 0; i < n; ++i) (fold[i] == k ? te : tr).push_back(i);
      Matrix Xtr = X(tr, Eigen::all), Xte = X(te, Eigen::all);
      Vector ytr = y(tr), yte = y(te);
      Vector warm = Vector::Zero(X.cols());
      for (std::size_t a = 0; a < grid.size(); ++a) {
        auto m = detail::fit_fixed(Xtr, ytr, grid[a], rho, opt, &warm);
        all_converged &= m.converged;
        mse[a] += (m.predict(Xte) - yte).squaredNorm() / static_cast<double>(n);
      }
    }
    for (std::size_t a = 0; a < grid.size(); ++a)
      if (!best || mse[a] < best->mse - 1e-15) best = Candidate{grid[a], rho, mse[a]};
  }
  if (!all_converged) log::warn("elastic net: some CV fits stopped at max_iter");
  auto model = detail::fit_fixed(X, y, best->alpha, best->l1_ratio, opt);
  model.cv_mse = best->mse;
  if (!model.converged)
    log::warn("elastic net did not converge: last update " + std::to_string(model.max_update) + " after " +
              std::to_string(model.iterations) + " sweeps");
  return model;
}

inline double residual_sum_of_squares(const ElasticNetModel& m, const Matrix& X, const Vector& y) {
  return (y - m.predict(X)).squaredNorm();
}

// (RSS_baseline - RSS_full) / RSS_baseline, in sample.
inline double partial_r2(double rss_full, double rss_baseline) {
  if (!(rss_baseline > 0.0)) throw DataError("partial R^2 undefined: baseline residual sum of squares is zero");
  return (rss_baseline - rss_full) / rss_baseline;
}

struct ExplanatoryPower {
  double partial_r2 = 0.0;
  double rss_full = 0.0;
  double rss_baseline = 0.0;
  ElasticNetModel full, baseline;
  std::size_t n = 0;
};

// Full model: topic frequencies plus controls; baseline: controls only.
inline ExplanatoryPower explanatory_power(const Matrix& topics, const Matrix& controls, const Vector& y,
                                          const ElasticNetOptions& opt = {}) {
  if (topics.rows() != controls.rows()) throw DataError("topic and control rows differ");
  Matrix X(topics.rows(), topics.cols() + controls.cols());
  X << topics, controls;
  ExplanatoryPower e;
  e.n = static_cast<std::size_t>(y.size());
  e.full = elastic_net_fit(X, y, opt);
  e.baseline = elastic_net_fit(controls, y, opt);
  e.rss_full = residual_sum_of_squares(e.full, X, y);
  e.rss_baseline = residual_sum_of_squares(e.baseline, controls, y);
  e.partial_r2 = partial_r2(e.rss_full, e.rss_baseline);
  return e;
}

// ---------------------------------------------------------------------------
// Per-topic OLS

struct RankDeficient : DataError {
  explicit RankDeficient(const std::string& what) : DataError("rank-deficient design: " + what) {}
};

enum class StandardErrors { conventional, cluster_firm };

struct RegressionResult {
  int topic_id = 0;
  OutcomeKind outcome = OutcomeKind::roa;
  int threshold = 0;
  double beta = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p_value = 1.0;
  double alpha = 0.0;  // log-employees coefficient
  double intercept = 0.0;
  std::size_t n_obs = 0;
  double df = 0.0;
  std::size_t n_posts = 0;
};

inline double two_sided_p(double t, double df) {
  namespace bm = boost::math;
  if (!std::isfinite(t)) return 0.0;
  return 2.0 * bm::cdf(bm::complement(bm::students_t(df), std::abs(t)));
}

// y on [1, f, log employees].  Cluster-robust errors use the CR1 small-sample
// factor and G - 1 degrees of freedom.
inline RegressionResult per_topic_ols(const Vector& f, const Vector& log_employees, const Vector& y,
                                      StandardErrors se_type = StandardErrors::conventional,
                                      const std::vector<std::string>* clusters = nullptr) {
  const auto n = f.size();
  if (log_employees.size() != n || y.size() != n) throw DataError("regression inputs differ in length");
  if (n <= 3) throw DataError("per-topic regression needs more than three rows");
  Matrix X(n, 3);
  X.col(0).setOnes();
  X.col(1) = f;
  X.col(2) = log_employees;
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw RankDeficient("topic frequency is constant or collinear with the controls");
  const Vector b = qr.solve(y);
  const Vector u = y - X * b;
  const Matrix xtx_inv = (X.transpose() * X).ldlt().solve(Matrix::Identity(3, 3));

  RegressionResult r;
  r.beta = b(1);
  r.alpha = b(2);
  r.intercept = b(0);
  r.n_obs = static_cast<std::size_t>(n);
  if (se_type == StandardErrors::conventional) {
    r.df = static_cast<double>(n - 3);
    const double sigma2 = u.squaredNorm() / r.df;
    r.se = std::sqrt(sigma2 * xtx_inv(1, 1));
  } else {
    if (!clusters || clusters->size() != static_cast<std::size_t>(n)) throw ConfigError("cluster ids missing for robust errors");
    std::map<std::string, Vector> score;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto [it, fresh] = score.try_emplace((*clusters)[i], Vector::Zero(3));
      it->second += X.row(i).transpose() * u(i);
    }
    const double g = static_cast<double>(score.size());
    if (g < 2) throw DataError("cluster-robust errors need at least two clusters");
    Matrix meat = Matrix::Zero(3, 3);
    for (const auto& [id, s] : score) meat += s * s.transpose();
    const double c = g / (g - 1.0) * (n - 1.0) / (n - 3.0);
    const Matrix v = c * xtx_inv * meat * xtx_inv;
    r.se = std::sqrt(v(1, 1));
    r.df = g - 1.0;
  }
  r.t = r.beta / r.se;
  r.p_value = two_sided_p(r.t, r.df);
  return r;
}

struct RegressionOptions {
  std::vector<int> thresholds{5, 10, 15};
  StandardErrors se_type = StandardErrors::conventional;
  std::size_t max_in_flight = 1;
};

// Every topic x outcome x threshold.  Topics whose frequency is constant in a
// sample are skipped with a warning.
inline std::vector<RegressionResult> run_topic_regressions(const std::map<int, std::set<std::string>>& topics,
                                                           const std::vector<LeaderPassage>& passages,
                                                           const std::vector<PanelRow>& panel,
                                                           const RegressionOptions& opt = {},
                                                           const std::map<FirmYear, int>* post_counts = nullptr) {
  std::vector<RegressionResult> out;
  for (int threshold : opt.thresholds) {
    auto freq = aggregate_frequencies(topics, passages, threshold, post_counts);
    auto design = build_design(freq, panel);
    struct Job {
      std::size_t k;
      OutcomeKind kind;
    };
    std::vector<Job> jobs;
    for (std::size_t k = 0; k < design.topic_ids.size(); ++k)
      for (auto kind : {OutcomeKind::roa, OutcomeKind::morale}) jobs.push_back({k, kind});
    auto results = parallel_map(jobs.size(), opt.max_in_flight, [&](std::size_t j) -> std::optional<RegressionResult> {
      const auto& job = jobs[j];
      try {
        auto r = per_topic_ols(design.f.col(job.k), design.log_employees, design.y.at(job.kind), opt.se_type, &design.firms);
        r.topic_id = design.topic_ids[job.k];
        r.outcome = job.kind;
        r.threshold = threshold;
        r.n_posts = freq.topic_posts.at(r.topic_id);
        return r;
      } catch (const DataError& e) {
        log::warn("topic " + std::to_string(design.topic_ids[job.k]) + " at threshold " + std::to_string(threshold) +
                  ": " + e.what());
        return std::nullopt;
      }
    });
    for (auto& r : results)
      if (r) out.push_back(*r);
  }
  return out;
}

struct RobustnessRule {
  double alpha = 0.05;
  int min_thresholds = 2;
  std::size_t min_posts = 100;
  std::vector<OutcomeKind> outcomes{OutcomeKind::roa, OutcomeKind::morale};
};

// Topics significant for every outcome at `min_thresholds` or more
// thresholds and backed by at least `min_posts` posts.
inline std::vector<int> robustness_filter(const std::vector<RegressionResult>& results, const RobustnessRule& rule = {}) {
  std::map<int, std::map<int, std::set<OutcomeKind>>> significant;  // topic -> threshold -> outcomes
  std::map<int, std::size_t> posts;
  for (const auto& r : results) {
    posts[r.topic_id] = std::max(posts[r.topic_id], r.n_posts);
    auto& at = significant[r.topic_id][r.threshold];
    if (r.p_value < rule.alpha) at.insert(r.outcome);
  }
  std::vector<int> kept;
  for (const auto& [topic, by_threshold] : significant) {
    int hits = 0;
    for (const auto& [threshold, kinds] : by_threshold) {
      bool all = true;
      for (auto k : rule.outcomes) all &= kinds.count(k) > 0;
      hits += all;
    }
    if (hits >= rule.min_thresholds && posts[topic] >= rule.min_posts) kept.push_back(topic);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Emitters

inline std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

inline std::string coefficient_cell(const RegressionResult& r, int precision = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << r.beta << " (" << r.se << ")" << significance_stars(r.p_value);
  return os.str();
}

struct TopicInfo {
  std::string slice_type;
  std::string slice_char;
  std::string name;
  std::string description;
  int topic_id = -1;
};

// Coefficient (SE) with stars per outcome and threshold, the post count, and
// the thresholds at which the topic is significant for every outcome.
inline std::string topic_outcome_csv(const std::vector<RegressionResult>& results, const std::map<int, TopicInfo>& info,
                                     const std::vector<int>& thresholds, const std::vector<int>& topics,
                                     double alpha = 0.05) {
  std::map<std::tuple<int, OutcomeKind, int>, const RegressionResult*> at;
  std::map<int, std::size_t> posts;
  for (const auto& r : results) {
    at[{r.topic_id, r.outcome, r.threshold}] = &r;
    posts[r.topic_id] = std::max(posts[r.topic_id], r.n_posts);
  }
  std::ostringstream os;
  std::vector<std::string> head{"type", "char", "topic_id", "topic_name", "topic_description"};
  for (auto kind : {OutcomeKind::roa, OutcomeKind::morale})
    for (int t : thresholds) head.push_back(to_string(kind) + ":t=" + std::to_string(t));
  head.push_back("n");
  head.push_back("significant_thresholds");
  for (std::size_t i = 0; i < head.size(); ++i) os << (i ? "," : "") << head[i];
  os << "\n";
  for (int topic : topics) {
    TopicInfo ti;
    if (auto it = info.find(topic); it != info.end()) ti = it->second;
    std::vector<std::string> cells{ti.slice_type, ti.slice_char, std::to_string(ti.topic_id < 0 ? topic : ti.topic_id), ti.name,
                                   ti.description};
    for (auto kind : {OutcomeKind::roa, OutcomeKind::morale})
      for (int t : thresholds) {
        auto it = at.find({topic, kind, t});
        cells.push_back(it == at.end() ? "" : coefficient_cell(*it->second));
      }
    cells.push_back(std::to_string(posts[topic]));
    std::string sig;
    for (int t : thresholds) {
      bool all = true;
      for (auto kind : {OutcomeKind::roa, OutcomeKind::morale}) {
        auto it = at.find({topic, kind, t});
        all &= it != at.end() && it->second->p_value < alpha;
      }
      if (all) sig += (sig.empty() ? "" : ";") + std::to_string(t);
    }
    cells.push_back(sig);
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv::escape(cells[i]);
    os << "\n";
  }
  return os.str();
}

inline json to_json(const RegressionResult& r) {
  return {{"topic_id", r.topic_id}, {"outcome", to_string(r.outcome)}, {"threshold", r.threshold},
          {"beta", r.beta},         {"se", r.se},                      {"t", r.t},
          {"p_value", r.p_value},   {"alpha", r.alpha},                {"intercept", r.intercept},
          {"n_obs", r.n_obs},       {"df", r.df},                      {"n_posts", r.n_posts},
          {"stars", significance_stars(r.p_value)}};
}

// Partial R^2 grid: rows (slice, model), columns outcome x granularity.
inline MetricTable explanatory_power_table(const std::vector<std::string>& models) {
  return MetricTable({"ROA", "Employees Morale"}, models);
}

}  // namespace topicflow
