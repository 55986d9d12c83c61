#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "topicflow/outcomes.hpp"

using namespace topicflow;
using testing_support::gaussian;
using testing_support::make_synthetic_panel;
using testing_support::uniform;

namespace {

LeaderPassage post(const std::string& id, const std::string& firm, int year) {
  LeaderPassage p;
  p.passage_id = id;
  p.firm_id = firm;
  p.year = year;
  return p;
}

PanelRow panel_row(const std::string& firm, int year, const std::string& industry, double roa, double morale = 0,
                   long long employees = 100) {
  return PanelRow{firm, year, industry, roa, morale, employees};
}

}  // namespace

// ---------------------------------------------------------------------------
// Frequencies

TEST(Frequencies, ShareOfFirmYearPosts) {
  std::vector<LeaderPassage> ps;
  std::map<int, std::set<std::string>> topics{{0, {}}, {1, {}}};
  for (int i = 0; i < 10; ++i) {
    ps.push_back(post("a" + std::to_string(i), "F", 2020));
    if (i < 4) topics[0].insert("a" + std::to_string(i));
  }
  topics[1].insert("a0");
  auto m = aggregate_frequencies(topics, ps, 5);
  ASSERT_EQ(m.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(m.f(0, 0), 0.4);
  EXPECT_DOUBLE_EQ(m.f(0, 1), 0.1);
  EXPECT_EQ(m.post_counts[0], 10);
  EXPECT_TRUE(m.included[0]);
  EXPECT_FALSE(aggregate_frequencies(topics, ps, 11).included[0]);
}

TEST(Frequencies, SoftPostsCountOncePerTopic) {
  std::vector<LeaderPassage> ps{post("x", "F", 1), post("y", "F", 1)};
  auto m = aggregate_frequencies({{0, {"x"}}, {1, {"x"}}}, ps, 1);
  EXPECT_DOUBLE_EQ(m.f(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(m.f(0, 1), 0.5);
}

TEST(Frequencies, UnmappedMemberIsAnError) {
  std::vector<LeaderPassage> ps{post("x", "F", 1), post("orphan", "", 0)};
  EXPECT_THROW(aggregate_frequencies({{0, {"missing"}}}, ps, 1), UnmappedPassage);
  EXPECT_THROW(aggregate_frequencies({{0, {"orphan"}}}, ps, 1), UnmappedPassage);
}

TEST(Frequencies, ExternalDenominator) {
  std::vector<LeaderPassage> ps{post("x", "F", 1), post("y", "F", 1)};
  std::map<FirmYear, int> totals{{{"F", 1}, 8}};
  auto m = aggregate_frequencies({{0, {"x"}}}, ps, 1, &totals);
  EXPECT_DOUBLE_EQ(m.f(0, 0), 0.125);
  std::map<FirmYear, int> too_small{{{"F", 1}, 1}};
  EXPECT_THROW(aggregate_frequencies({{0, {"x"}}}, ps, 1, &too_small), DataError);
}

TEST(Frequencies, MatchesExhaustiveTally) {
  auto sp = make_synthetic_panel(3, 2.0, 10, 3, 4);
  auto m = aggregate_frequencies(sp.topics, sp.passages, 10);
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    int total = 0;
    for (const auto& p : sp.passages) total += FirmYear{p.firm_id, p.year} == m.rows[r];
    EXPECT_EQ(m.post_counts[r], total);
    EXPECT_EQ(m.included[r], total >= 10);
    for (std::size_t k = 0; k < m.topic_ids.size(); ++k) {
      int hits = 0;
      for (const auto& p : sp.passages)
        hits += FirmYear{p.firm_id, p.year} == m.rows[r] && sp.topics.at(m.topic_ids[k]).count(p.passage_id);
      EXPECT_DOUBLE_EQ(m.f(r, k), static_cast<double>(hits) / total);
      EXPECT_GE(m.f(r, k), 0.0);
      EXPECT_LE(m.f(r, k), 1.0);
    }
  }
}

// ---------------------------------------------------------------------------
// Demeaning

TEST(Demean, PairAndSingletonGroups) {
  std::vector<PanelRow> panel{panel_row("A", 1, "x", 3), panel_row("B", 1, "x", 5), panel_row("C", 1, "y", 7)};
  auto v = demean_by_year_industry(panel, OutcomeKind::roa);
  EXPECT_DOUBLE_EQ(v.values(0), -1);
  EXPECT_DOUBLE_EQ(v.values(1), 1);
  EXPECT_DOUBLE_EQ(v.values(2), 0);
  EXPECT_EQ(v.singleton_groups, 1u);
  EXPECT_TRUE(v.demeaned);
}

TEST(Demean, GroupMeansVanishAndShiftInvariance) {
  auto sp = make_synthetic_panel(8);
  auto v = demean_by_year_industry(sp.panel, OutcomeKind::morale);
  std::map<std::pair<int, std::string>, double> sums;
  for (std::size_t i = 0; i < sp.panel.size(); ++i) sums[{sp.panel[i].year, sp.panel[i].industry}] += v.values(i);
  for (const auto& [g, s] : sums) EXPECT_LE(std::abs(s), 1e-10);
  auto shifted = sp.panel;
  for (auto& r : shifted)
    if (r.year == 2016 && r.industry == "retail") r.morale += 42.0;
  auto w = demean_by_year_industry(shifted, OutcomeKind::morale);
  EXPECT_LE((v.values - w.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Demean, MissingIndustryIsAnError) {
  EXPECT_THROW(demean_by_year_industry({panel_row("A", 1, "", 1)}, OutcomeKind::roa), DataError);
}

// ---------------------------------------------------------------------------
// Elastic net

TEST(ElasticNet, ZeroPenaltyMatchesNormalEquations) {
  Matrix X = gaussian(80, 4, 1);
  X.col(1) += 0.5 * X.col(0);
  Vector y = X * Vector::LinSpaced(4, 1, 4) + 0.3 * gaussian(80, 1, 2).col(0);
  ElasticNetOptions opt;
  opt.alphas = {0.0};
  opt.l1_ratios = {1.0};
  opt.tol = 1e-14;
  opt.max_iter = 100000;
  auto m = elastic_net_fit(X, y, opt);
  Matrix Xi(80, 5);
  Xi << Vector::Ones(80), X;
  Vector b = oracles::ols(Xi, y);
  EXPECT_NEAR(m.intercept, b(0), 1e-6);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(m.coef(j), b(j + 1), 1e-6);
  EXPECT_TRUE(m.converged);
}

TEST(ElasticNet, ExactLineWithTinyPenalty) {
  Matrix X = uniform(50, 1, 4, 0, 1);
  Vector y = 3.0 * X.col(0);
  ElasticNetOptions opt;
  opt.alphas = {1e-8};
  opt.l1_ratios = {0.5};
  auto m = elastic_net_fit(X, y, opt);
  EXPECT_NEAR(m.coef(0), 3.0, 1e-3);
}

TEST(ElasticNet, SatisfiesOptimalityConditions) {
  Matrix X = gaussian(120, 6, 5);
  Vector y = X.col(0) - 0.5 * X.col(3) + gaussian(120, 1, 6).col(0);
  for (double rho : {0.3, 1.0}) {
    ElasticNetOptions opt;
    opt.alphas = {0.05};
    opt.l1_ratios = {rho};
    opt.tol = 1e-13;
    opt.max_iter = 100000;
    auto m = elastic_net_fit(X, y, opt);
    // same problem rebuilt on standardized columns
    const double n = 120;
    Vector mu = X.colwise().mean().transpose();
    Matrix Z = X.rowwise() - mu.transpose();
    Vector sd = (Z.colwise().squaredNorm().array() / n).sqrt().matrix().transpose();
    for (int j = 0; j < 6; ++j) Z.col(j) /= sd(j);
    Vector bz = m.coef.cwiseProduct(sd);
    Vector r = (y.array() - y.mean()).matrix() - Z * bz;
    for (int j = 0; j < 6; ++j) {
      const double grad = Z.col(j).dot(r) / n - 0.05 * (1 - rho) * bz(j);
      if (bz(j) != 0.0)
        EXPECT_NEAR(grad, 0.05 * rho * (bz(j) > 0 ? 1 : -1), 1e-8);
      else
        EXPECT_LE(std::abs(grad), 0.05 * rho + 1e-10);
    }
  }
}

TEST(ElasticNet, NullDesignHasNearZeroFit) {
  Matrix X = gaussian(1000, 5, 7);
  Vector y = gaussian(1000, 1, 8).col(0);
  auto m = elastic_net_fit(X, y);
  const double r2 = 1.0 - (y - m.predict(X)).squaredNorm() / (y.array() - y.mean()).square().sum();
  EXPECT_LT(r2, 0.05);
  EXPECT_LT(m.coef.cwiseAbs().maxCoeff(), 0.1);
}

TEST(ElasticNet, CrossValidationIsSeeded) {
  Matrix X = gaussian(60, 3, 9);
  Vector y = X.col(0) + gaussian(60, 1, 10).col(0);
  ElasticNetOptions opt;
  opt.seed = 42;
  auto a = elastic_net_fit(X, y, opt), b = elastic_net_fit(X, y, opt);
  EXPECT_EQ(a.alpha, b.alpha);
  EXPECT_EQ(a.l1_ratio, b.l1_ratio);
  EXPECT_TRUE(a.coef == b.coef);
}

TEST(ElasticNet, RejectsBadSettings) {
  Matrix X = gaussian(5, 2, 1);
  Vector y = gaussian(5, 1, 2).col(0);
  ElasticNetOptions opt;
  opt.cv_folds = 5;
  EXPECT_THROW(elastic_net_fit(X, y, opt), ConfigError);
  opt.cv_folds = 2;
  opt.l1_ratios = {1.5};
  EXPECT_THROW(elastic_net_fit(X, y, opt), ConfigError);
  opt.l1_ratios = {0.0};
  EXPECT_THROW(elastic_net_fit(X, y, opt), ConfigError);
}

// ---------------------------------------------------------------------------
// Partial R^2

TEST(PartialR2, Definitions) {
  EXPECT_DOUBLE_EQ(partial_r2(5.0, 5.0), 0.0);
  EXPECT_DOUBLE_EQ(partial_r2(3.0, 4.0), 0.25);
  EXPECT_LT(partial_r2(5.0, 4.0), 0.0);
  EXPECT_THROW(partial_r2(0.0, 0.0), DataError);
}

TEST(PartialR2, UnregularizedEqualsIncrementalR2) {
  Matrix F = gaussian(100, 3, 11);
  Matrix C = gaussian(100, 1, 12);
  Vector y = F.col(1) + C.col(0) + gaussian(100, 1, 13).col(0);
  ElasticNetOptions opt;
  opt.alphas = {0.0};
  opt.l1_ratios = {1.0};
  opt.tol = 1e-14;
  opt.max_iter = 100000;
  auto e = explanatory_power(F, C, y, opt);
  auto r2 = [&](const Matrix& X) {
    Matrix Xi(100, X.cols() + 1);
    Xi << Vector::Ones(100), X;
    Vector res = y - Xi * oracles::ols(Xi, y);
    return 1.0 - res.squaredNorm() / (y.array() - y.mean()).square().sum();
  };
  Matrix FC(100, 4);
  FC << F, C;
  const double r2_full = r2(FC), r2_base = r2(C);
  EXPECT_NEAR(e.partial_r2, (r2_full - r2_base) / (1 - r2_base), 1e-8);
}

TEST(PartialR2, MatchesAnalyticVarianceShare) {
  // y = b f1 + control + noise with f ~ U(0, 1), so the share is
  // b^2/12 / (b^2/12 + sigma^2).
  const double b = 2.0, sigma = 0.5;
  const double share = b * b / 12.0 / (b * b / 12.0 + sigma * sigma);
  double sum = 0.0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    Matrix F = uniform(300, 4, 100 + s);
    Matrix C = gaussian(300, 1, 200 + s);
    Vector y = b * F.col(0) + C.col(0) + sigma * gaussian(300, 1, 300 + s).col(0);
    ElasticNetOptions opt;
    opt.seed = s;
    sum += explanatory_power(F, C, y, opt).partial_r2;
  }
  EXPECT_NEAR(sum / seeds, share, 0.02);
}

// ---------------------------------------------------------------------------
// Per-topic OLS

TEST(TopicOls, ExactSlope) {
  Vector f = uniform(40, 1, 1).col(0);
  Vector c = gaussian(40, 1, 2).col(0);
  auto r = per_topic_ols(f, c, 2.0 * f);
  EXPECT_NEAR(r.beta, 2.0, 1e-10);
  EXPECT_LT(r.p_value, 1e-10);
  EXPECT_EQ(r.df, 37);
}

TEST(TopicOls, ConstantFrequencyIsRankDeficient) {
  Vector f = Vector::Constant(20, 0.3);
  EXPECT_THROW(per_topic_ols(f, gaussian(20, 1, 1).col(0), gaussian(20, 1, 2).col(0)), RankDeficient);
  Vector c = gaussian(20, 1, 3).col(0);
  EXPECT_THROW(per_topic_ols(c, 2.0 * c, c), RankDeficient);
  EXPECT_THROW(per_topic_ols(Vector::Ones(3), Vector::Ones(3), Vector::Ones(3)), DataError);
}

TEST(TopicOls, MatchesNormalEquations) {
  for (int s = 0; s < 10; ++s) {
    Vector f = uniform(200, 1, s).col(0);
    Vector c = gaussian(200, 1, 50 + s).col(0);
    Vector y = 0.7 * f - 0.2 * c + gaussian(200, 1, 90 + s).col(0);
    Matrix X(200, 3);
    X << Vector::Ones(200), f, c;
    Matrix inv = (X.transpose() * X).inverse();
    Vector b = inv * X.transpose() * y;
    const double sigma2 = (y - X * b).squaredNorm() / 197.0;
    auto r = per_topic_ols(f, c, y);
    EXPECT_NEAR(r.beta, b(1), 1e-8);
    EXPECT_NEAR(r.alpha, b(2), 1e-8);
    EXPECT_NEAR(r.se, std::sqrt(sigma2 * inv(1, 1)), 1e-8);
    EXPECT_GT(r.se, 0.0);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
  }
}

TEST(TopicOls, Invariances) {
  Vector f = uniform(60, 1, 1).col(0);
  Vector c = gaussian(60, 1, 2).col(0);
  Vector y = 0.4 * f + gaussian(60, 1, 3).col(0);
  auto base = per_topic_ols(f, c, y);
  auto shifted = per_topic_ols(f, c, (y.array() + 10.0).matrix());
  EXPECT_NEAR(base.beta, shifted.beta, 1e-10);
  auto scaled = per_topic_ols((f * 100.0).eval(), c, y);
  EXPECT_NEAR(scaled.beta * 100.0, base.beta, 1e-10);
  EXPECT_NEAR(scaled.p_value, base.p_value, 1e-10);
}

TEST(TopicOls, SingletonClustersGiveHc1) {
  Vector f = uniform(50, 1, 4).col(0);
  Vector c = gaussian(50, 1, 5).col(0);
  Vector y = f + (f.array() * gaussian(50, 1, 6).col(0).array()).matrix();
  std::vector<std::string> ids;
  for (int i = 0; i < 50; ++i) ids.push_back(std::to_string(i));
  auto r = per_topic_ols(f, c, y, StandardErrors::cluster_firm, &ids);
  Matrix X(50, 3);
  X << Vector::Ones(50), f, c;
  Matrix inv = (X.transpose() * X).inverse();
  Vector u = y - X * (inv * X.transpose() * y);
  Matrix meat = Matrix::Zero(3, 3);
  for (int i = 0; i < 50; ++i) meat += u(i) * u(i) * X.row(i).transpose() * X.row(i);
  Matrix v = 50.0 / 47.0 * inv * meat * inv;
  EXPECT_NEAR(r.se, std::sqrt(v(1, 1)), 1e-10);
  EXPECT_EQ(r.df, 49);
  EXPECT_THROW(per_topic_ols(f, c, y, StandardErrors::cluster_firm), ConfigError);
}

TEST(TopicOls, RecoversPlantedSlope) {
  int covered = 0;
  for (int s = 0; s < 100; ++s) {
    auto sp = make_synthetic_panel(1000 + s);
    auto design = build_design(aggregate_frequencies(sp.topics, sp.passages, 0), sp.panel);
    ASSERT_EQ(design.rows.size(), 300u);
    auto r = per_topic_ols(design.f.col(0), design.log_employees, design.y.at(OutcomeKind::morale));
    covered += std::abs(r.beta - 2.0) <= 3.0 * r.se;
  }
  EXPECT_GE(covered, 95);
}

// ---------------------------------------------------------------------------
// Robustness filter

namespace {

std::vector<RegressionResult> significance(int topic, std::vector<int> sig_thresholds, std::size_t posts) {
  std::vector<RegressionResult> out;
  for (int t : {5, 10, 15})
    for (auto k : {OutcomeKind::roa, OutcomeKind::morale}) {
      RegressionResult r;
      r.topic_id = topic;
      r.threshold = t;
      r.outcome = k;
      r.n_posts = posts;
      r.p_value = std::count(sig_thresholds.begin(), sig_thresholds.end(), t) ? 0.01 : 0.3;
      out.push_back(r);
    }
  return out;
}

}  // namespace

TEST(Robustness, RuleApplication) {
  EXPECT_EQ(robustness_filter(significance(1, {5, 10}, 150)), std::vector<int>{1});
  EXPECT_TRUE(robustness_filter(significance(1, {10}, 500)).empty());
  EXPECT_TRUE(robustness_filter(significance(1, {5, 10, 15}, 99)).empty());
  auto one_outcome = significance(2, {5, 10}, 150);
  for (auto& r : one_outcome)
    if (r.outcome == OutcomeKind::roa) r.p_value = 0.2;
  EXPECT_TRUE(robustness_filter(one_outcome).empty());
}

TEST(Robustness, KeepsPlantedTopicAndControlsNullRate) {
  auto planted = make_synthetic_panel(77);
  auto kept = robustness_filter(run_topic_regressions(planted.topics, planted.passages, planted.panel));
  EXPECT_NE(std::find(kept.begin(), kept.end(), 0), kept.end());

  int passed = 0, candidates = 0;
  for (int s = 0; s < 20; ++s) {
    auto null = make_synthetic_panel(500 + s, 0.0);
    passed += robustness_filter(run_topic_regressions(null.topics, null.passages, null.panel)).size();
    candidates += null.topics.size();
  }
  EXPECT_LE(static_cast<double>(passed) / candidates, 3 * 0.05);
}

TEST(Regressions, CoverEveryTopicOutcomeAndThreshold) {
  auto sp = make_synthetic_panel(5, 2.0, 20, 3, 3);
  auto rs = run_topic_regressions(sp.topics, sp.passages, sp.panel);
  EXPECT_EQ(rs.size(), 3u * 2u * 3u);
  for (const auto& r : rs) EXPECT_EQ(r.n_posts, sp.topics.at(r.topic_id).size());
}

// ---------------------------------------------------------------------------
// Emitters

TEST(Emit, StarsAndCells) {
  EXPECT_EQ(significance_stars(0.005), "***");
  EXPECT_EQ(significance_stars(0.03), "**");
  EXPECT_EQ(significance_stars(0.07), "*");
  EXPECT_EQ(significance_stars(0.2), "");
  RegressionResult r;
  r.beta = 29.741;
  r.se = 14.44;
  r.p_value = 0.04;
  EXPECT_EQ(coefficient_cell(r), "29.74 (14.44)**");
}

TEST(Emit, TopicTableColumns) {
  auto rs = significance(3, {5, 10}, 150);
  auto csv = topic_outcome_csv(rs, {{3, {"non_top", "behavior", "fair evaluation", "desc"}}}, {5, 10, 15}, {3});
  EXPECT_NE(csv.find("type,char,topic_id,topic_name,topic_description,roa:t=5,roa:t=10,roa:t=15,morale:t=5,morale:t=10,"
                     "morale:t=15,n,significant_thresholds"),
            std::string::npos);
  EXPECT_NE(csv.find("non_top,behavior,3,fair evaluation,desc,"), std::string::npos);
  EXPECT_NE(csv.find(",150,5;10\n"), std::string::npos) << csv;
  auto j = to_json(rs[0]);
  EXPECT_EQ(j["outcome"], "roa");
}
