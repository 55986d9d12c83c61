#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "support.hpp"
#include "topicflow/metrics.hpp"
#include "topicflow/mock_llm.hpp"

using namespace topicflow;

namespace {

using Docs = std::vector<std::vector<std::string>>;

LlmClient heuristic_client() { return LlmClient(std::make_shared<HeuristicLlmProvider>()); }

}  // namespace

TEST(Npmi, HandComputedPair) {
  Docs docs{{"a", "b"}, {"a", "b"}, {"a"}, {"c"}};
  auto r = npmi_coherence({{"a", "b"}}, docs);
  EXPECT_NEAR(r.per_topic[0], std::log(4.0 / 3.0) / std::log(2.0), 1e-9);
  EXPECT_EQ(r.pairs_evaluated, 1u);
  EXPECT_EQ(r.pairs_skipped, 0u);
}

TEST(Npmi, ExtremesAndSkippedPairs) {
  Docs always{{"a", "b"}, {"a", "b"}};
  EXPECT_DOUBLE_EQ(npmi_coherence({{"a", "b"}}, always).per_topic[0], 1.0);
  Docs never{{"a"}, {"b"}, {"c"}};
  EXPECT_NEAR(npmi_coherence({{"a", "b"}}, never).per_topic[0], -1.0, 0.1);
  auto r = npmi_coherence({{"a", "zzz", "b"}}, never);
  EXPECT_EQ(r.pairs_skipped, 2u);
  EXPECT_EQ(r.pairs_evaluated, 1u);
  EXPECT_TRUE(std::isnan(npmi_coherence({{"x", "y"}}, never).per_topic[0]));
}

TEST(Npmi, MatchesCountingOracleOnRandomCorpora) {
  std::mt19937_64 rng(7);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f", "g", "h"};
  for (int trial = 0; trial < 20; ++trial) {
    Docs docs(30);
    for (auto& d : docs)
      for (const auto& w : vocab)
        if (rng() % 3 == 0) d.push_back(w);
    docs.push_back(vocab);
    std::vector<std::string> topic{vocab[rng() % 8], vocab[rng() % 8], vocab[rng() % 8], vocab[rng() % 8]};
    topic.erase(std::unique(topic.begin(), topic.end()), topic.end());
    if (topic.size() < 2) continue;
    double expect = 0;
    int pairs = 0;
    for (std::size_t i = 0; i < topic.size(); ++i)
      for (std::size_t j = i + 1; j < topic.size(); ++j, ++pairs) expect += oracles::npmi(docs, topic[i], topic[j]);
    auto r = npmi_coherence({topic}, docs);
    EXPECT_NEAR(r.per_topic[0], expect / pairs, 1e-12);
    EXPECT_GE(r.per_topic[0], -1.0);
    EXPECT_LE(r.per_topic[0], 1.0);
  }
}

TEST(Npmi, RejectsDegenerateInput) {
  EXPECT_THROW(npmi_coherence({{"a"}}, {{"a"}}), DataError);
  EXPECT_THROW(npmi_coherence({{"a", "b"}}, {}), DataError);
}

TEST(BowDiversity, CountsUniqueWords) {
  std::vector<std::string> t1, t2;
  for (int i = 0; i < 10; ++i) t1.push_back("w" + std::to_string(i));
  for (int i = 5; i < 15; ++i) t2.push_back("w" + std::to_string(i));
  EXPECT_DOUBLE_EQ(bow_topic_diversity({t1}), 1.0);
  EXPECT_DOUBLE_EQ(bow_topic_diversity({t1, t1}), 0.5);
  EXPECT_DOUBLE_EQ(bow_topic_diversity({t1, t2}), 0.75);
}

TEST(SemanticDiversity, ComponentsFromEdges) {
  EXPECT_DOUBLE_EQ(semantic_diversity_from_edges(4, {}).value, 1.0);
  EXPECT_DOUBLE_EQ(semantic_diversity_from_edges(4, {{0, 1}, {1, 2}}).value, 0.5);
  auto all = semantic_diversity_from_edges(5, {{0, 1}, {2, 3}, {3, 4}, {1, 4}});
  EXPECT_DOUBLE_EQ(all.value, 0.2);
  EXPECT_EQ(all.component, std::vector<int>(5, 0));
  EXPECT_THROW(semantic_diversity_from_edges(2, {{0, 2}}), DataError);
}

TEST(SemanticDiversity, InRangeForRandomGraphs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 1 + static_cast<int>(rng() % 12);
    std::vector<std::pair<int, int>> edges;
    for (int e = 0; e < static_cast<int>(rng() % 20); ++e) edges.emplace_back(rng() % n, rng() % n);
    double v = semantic_diversity_from_edges(n, edges).value;
    EXPECT_GE(v, 1.0 / n);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SemanticDiversity, JudgedDuplicatesCollapse) {
  auto llm = heuristic_client();
  std::vector<EvalTopic> topics{{"0", "quick meetings", "Passages about meeting agenda", {}, {}},
                                {"1", "quick meetings", "Passages about meeting agenda", {}, {}},
                                {"2", "salary raise", "Passages about salary bonus", {}, {}}};
  auto r = semantic_topic_diversity(llm, topics);
  EXPECT_NEAR(r.value, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(r.raw_scores.size(), 3u);
}

TEST(JudgeMetrics, AlignmentIsBoundedAndSampleIsDeterministic) {
  auto llm = heuristic_client();
  EvalTopic t{"7", "meeting agenda", "Passages about meeting agenda schedule", {}, {}};
  for (int i = 0; i < 80; ++i) t.member_texts.push_back(i % 2 ? "meeting agenda schedule weekly" : "salary payroll");
  double a = topic_label_alignment(llm, t, 30, 1);
  double b = topic_label_alignment(llm, t, 30, 1);
  EXPECT_DOUBLE_EQ(a, b);
  EXPECT_GE(a, 0.0);
  EXPECT_LE(a, 1.0);
  EXPECT_GT(a, 0.1);
  EXPECT_LT(a, 0.9);
  EvalTopic empty{"8", "x", "y", {}, {}};
  EXPECT_THROW(topic_label_alignment(llm, empty), DataError);
}

TEST(JudgeMetrics, ConsistencyFavoursSingleStanceNames) {
  auto llm = heuristic_client();
  EvalTopic polar{"0", "quick decisions", "Passages about decisions", {}, {}};
  EvalTopic mixed{"1", "quick or slow decisions", "Passages about decisions", {}, {}};
  EXPECT_GT(polarity_stance_consistency(llm, polar), polarity_stance_consistency(llm, mixed));
  EXPECT_GE(specificity(llm, polar), 0.0);
  EXPECT_LE(specificity(llm, polar), 1.0);
}

TEST(Evaluate, ProducesAllSixReports) {
  auto llm = heuristic_client();
  auto corpus = testing_support::make_planted_corpus(5, 20);
  std::vector<std::string> texts;
  for (const auto& p : corpus.slice.passages) texts.push_back(p.text);
  std::vector<EvalTopic> topics{
      {"0", "meeting agenda", "Passages about meeting agenda", {"meeting", "agenda", "schedule"}, {texts[0], texts[1]}},
      {"1", "salary bonus", "Passages about salary bonus", {"salary", "bonus", "raise"}, {texts[2]}}};
  auto reports = evaluate_topics(llm, topics, texts);
  ASSERT_EQ(reports.size(), metric_ids().size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    EXPECT_EQ(reports[i].metric_id, metric_ids()[i]);
    auto j = to_json(reports[i]);
    EXPECT_TRUE(j.contains("aggregate"));
  }
  EXPECT_GT(reports[1].aggregate, 0.0);
  EXPECT_DOUBLE_EQ(reports[3].aggregate, 0.3);
}

// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd classic_ratings() {
  Eigen::MatrixXd y(6, 4);
  y << 9, 2, 5, 8, 6, 1, 3, 2, 8, 4, 6, 8, 7, 1, 2, 6, 10, 5, 6, 9, 6, 2, 4, 7;
  return y;
}

}  // namespace

TEST(Icc, ClassicSixByFourExample) {
  auto r = icc_2k(classic_ratings());
  EXPECT_NEAR(r.icc, 0.62, 0.005);
  EXPECT_NEAR(r.icc, 0.620050547599, 1e-9);
  EXPECT_NEAR(r.ci_low, 0.0711368153025, 1e-6);
  EXPECT_NEAR(r.ci_high, 0.927232040168, 1e-6);
}

TEST(Icc, TwoRaterIntervalMatchesReference) {
  auto r = icc_2_2(classic_ratings().leftCols(2));
  EXPECT_NEAR(r.icc, 0.223255813953, 1e-9);
  EXPECT_NEAR(r.ci_low, -0.0484525008228, 1e-6);
  EXPECT_NEAR(r.ci_high, 0.749883961134, 1e-6);
}

TEST(Icc, MatchesLoopAnovaOnRandomRatings) {
  for (int s = 0; s < 25; ++s) {
    Eigen::MatrixXd y = testing_support::uniform(5 + s, 2 + s % 3, s, 0, 10);
    EXPECT_NEAR(icc_2k(y).icc, oracles::icc_2k(y), 1e-10);
  }
}

TEST(Icc, IntervalCoversTruthAtNominalRate) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0, 1);
  const double sr = 1.0, sc = 0.3, se = 0.6;
  const double truth = sr * sr / (sr * sr + (sc * sc + se * se) / 2);
  int covered = 0, trials = 400;
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd y(30, 2);
    double c[2] = {sc * z(rng), sc * z(rng)};
    for (int i = 0; i < 30; ++i) {
      double r = sr * z(rng);
      for (int j = 0; j < 2; ++j) y(i, j) = r + c[j] + se * z(rng);
    }
    auto res = icc_2_2(y);
    EXPECT_LE(res.ci_low, res.icc);
    EXPECT_GE(res.ci_high, res.icc);
    covered += res.ci_low <= truth && truth <= res.ci_high;
  }
  EXPECT_GE(covered, 0.90 * trials);
  EXPECT_LE(covered, 0.995 * trials);
}

TEST(Icc, PerfectAgreementAndInvariances) {
  Eigen::MatrixXd y(5, 2);
  y << 1, 1, 2, 2, 3, 3, 4, 4, 5, 5;
  EXPECT_NEAR(icc_2_2(y).icc, 1.0, 1e-12);
  Eigen::MatrixXd r = testing_support::uniform(12, 2, 4, 0, 10);
  Eigen::MatrixXd shifted = (r.array() * 3.0 + 7.0).matrix();
  EXPECT_NEAR(icc_2_2(r).icc, icc_2_2(shifted).icc, 1e-10);
  Eigen::MatrixXd swapped(12, 2);
  swapped << r.col(1), r.col(0);
  EXPECT_NEAR(icc_2_2(r).icc, icc_2_2(swapped).icc, 1e-12);
}

TEST(Icc, RejectsInvalidRatings) {
  EXPECT_THROW(icc_2_2(Eigen::MatrixXd::Ones(2, 2)), DataError);
  EXPECT_THROW(icc_2_2(Eigen::MatrixXd::Ones(5, 2)), DegenerateRatings);
  Eigen::MatrixXd nan = testing_support::uniform(5, 2, 1);
  nan(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(icc_2_2(nan), DataError);
  EXPECT_THROW(icc_2_2(testing_support::uniform(5, 3, 1)), DataError);
}

TEST(Icc, LoadsRatingsCsv) {
  testing_support::TempDir dir;
  write_file_atomic(dir / "r.csv", "id,judge,human\nt1,0.5,0.6\nt2,0.9,1.0\nt3,0.1,0.2\n");
  auto m = load_ratings(dir / "r.csv");
  ASSERT_EQ(m.rows(), 3);
  EXPECT_DOUBLE_EQ(m(1, 1), 1.0);
  write_file_atomic(dir / "bad.csv", "id,judge,human\nt1,0.5,x\n");
  EXPECT_THROW(load_ratings(dir / "bad.csv"), DataError);
}

TEST(MetricTable, MarksMaximaPerSliceAndColumn) {
  MetricTable t({"npmi"}, {"A", "B"});
  t.set("top_ability", "A", "npmi", "Tmin", 0.2);
  t.set("top_ability", "B", "npmi", "Tmin", 0.3);
  t.set("top_ability", "A", "npmi", "Tmid", 0.5);
  t.set("non_top_behavior", "A", "npmi", "Tmin", 0.1);
  EXPECT_TRUE(t.is_max("top_ability", "B", "npmi", "Tmin"));
  EXPECT_FALSE(t.is_max("top_ability", "A", "npmi", "Tmin"));
  EXPECT_TRUE(t.is_max("non_top_behavior", "A", "npmi", "Tmin"));
  auto md = t.markdown(2);
  EXPECT_NE(md.find("| top | ability | B | **0.30** | – | – |"), std::string::npos) << md;
  EXPECT_NE(md.find("| non_top | behavior | A | **0.10** |"), std::string::npos) << md;
  auto csv = t.csv(2);
  EXPECT_NE(csv.find("type,char,model,npmi:Tmin,npmi:Tmid,npmi:Tmax"), std::string::npos);
  EXPECT_NE(csv.find("top,ability,A,0.20,**0.50**,"), std::string::npos) << csv;
}
