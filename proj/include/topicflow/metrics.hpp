#pragma once

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "topicflow/clustering.hpp"
#include "topicflow/common.hpp"
#include "topicflow/corpus.hpp"
#include "topicflow/llm.hpp"
#include "topicflow/log.hpp"
#include "topicflow/parallel.hpp"
#include "topicflow/rubrics.hpp"

namespace topicflow {

// What the metrics need to know about a topic.
struct EvalTopic {
  std::string id;
  std::string name;
  std::string description;
  std::vector<std::string> top_words;
  std::vector<std::string> member_texts;
};

// ---------------------------------------------------------------------------
// NPMI

inline constexpr double kNpmiEpsilon = 1e-12;

struct NpmiResult {
  std::vector<double> per_topic;  // NaN when every pair of the topic was skipped
  double mean = 0.0;
  std::size_t pairs_evaluated = 0;
  std::size_t pairs_skipped = 0;  // a word with zero document frequency
};

inline double npmi_from_probabilities(double p_i, double p_j, double p_ij) {
  if (p_ij >= 1.0) return 1.0;
  const double joint = p_ij + kNpmiEpsilon;
  return std::clamp(std::log(joint / (p_i * p_j)) / -std::log(joint), -1.0, 1.0);
}

// Document-level co-occurrence over `reference_docs` (each a token list).
inline NpmiResult npmi_coherence(const std::vector<std::vector<std::string>>& topics,
                                 const std::vector<std::vector<std::string>>& reference_docs) {
  if (reference_docs.empty()) throw DataError("NPMI needs a non-empty reference corpus");
  std::set<std::string> vocab;
  for (const auto& t : topics) {
    if (t.size() < 2) throw DataError("NPMI needs at least two words per topic");
    vocab.insert(t.begin(), t.end());
  }
  // posting lists restricted to the words we score
  std::map<std::string, std::vector<std::size_t>> postings;
  for (std::size_t d = 0; d < reference_docs.size(); ++d) {
    std::set<std::string> seen;
    for (const auto& w : reference_docs[d])
      if (vocab.count(w) && seen.insert(w).second) postings[w].push_back(d);
  }
  const double n = static_cast<double>(reference_docs.size());
  NpmiResult r;
  double sum = 0.0;
  std::size_t scored_topics = 0;
  for (const auto& t : topics) {
    double topic_sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < t.size(); ++a)
      for (std::size_t b = a + 1; b < t.size(); ++b) {
        auto ia = postings.find(t[a]), ib = postings.find(t[b]);
        if (ia == postings.end() || ib == postings.end()) {
          ++r.pairs_skipped;
          continue;
        }
        std::vector<std::size_t> both;
        std::set_intersection(ia->second.begin(), ia->second.end(), ib->second.begin(), ib->second.end(),
                              std::back_inserter(both));
        topic_sum += npmi_from_probabilities(ia->second.size() / n, ib->second.size() / n, both.size() / n);
        ++pairs;
      }
    r.pairs_evaluated += pairs;
    if (pairs == 0) {
      r.per_topic.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    r.per_topic.push_back(topic_sum / static_cast<double>(pairs));
    sum += r.per_topic.back();
    ++scored_topics;
  }
  if (r.pairs_skipped) log::warn("NPMI skipped " + std::to_string(r.pairs_skipped) + " pairs with unseen words");
  r.mean = scored_topics ? sum / static_cast<double>(scored_topics) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

// Unique words over (10 x number of topics).
inline double bow_topic_diversity(const std::vector<std::vector<std::string>>& topics, std::size_t words_per_topic = 10) {
  if (topics.empty()) throw DataError("topic diversity needs at least one topic");
  std::set<std::string> unique;
  for (const auto& t : topics) unique.insert(t.begin(), t.end());
  return static_cast<double>(unique.size()) / static_cast<double>(words_per_topic * topics.size());
}

// ---------------------------------------------------------------------------
// Judge-based metrics

struct MetricReport {
  std::string metric_id;
  std::vector<std::pair<std::string, double>> items;  // per topic or per pair
  double aggregate = 0.0;
  std::size_t n_evaluated = 0;
  json config = json::object();
  json details = json::object();
};

inline json to_json(const MetricReport& r) {
  json items = json::array();
  for (const auto& [id, v] : r.items) items.push_back({{"id", id}, {"score", std::isnan(v) ? json(nullptr) : json(v)}});
  return {{"metric_id", r.metric_id}, {"aggregate", std::isnan(r.aggregate) ? json(nullptr) : json(r.aggregate)},
          {"n_evaluated", r.n_evaluated}, {"items", items}, {"config", r.config}, {"details", r.details}};
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Mean normalized alignment score over a seeded sample of member documents.
inline double topic_label_alignment(LlmClient& llm, const EvalTopic& topic, std::size_t sample_size = 30,
                                    std::uint64_t seed = 0) {
  if (topic.member_texts.empty()) throw DataError("label alignment needs at least one member document");
  auto picks = sample_indices(topic.member_texts.size(), sample_size, fnv1a64(topic.id, seed ^ 0x51ed2701ULL));
  auto scores = parallel_map(picks.size(), llm.options().max_in_flight, [&](std::size_t i) {
    return judge(llm, label_alignment_rubric(),
                 {{"topic_name", topic.name}, {"topic_short_description", topic.description},
                  {"document", topic.member_texts[picks[i]]}})
        .normalized;
  });
  return mean_of(scores);
}

inline double specificity(LlmClient& llm, const EvalTopic& topic) {
  return judge(llm, specificity_rubric(), {{"topic_name", topic.name}, {"topic_short_description", topic.description}})
      .normalized;
}

inline double polarity_stance_consistency(LlmClient& llm, const EvalTopic& topic) {
  return judge(llm, stance_consistency_rubric(), {{"topic_name", topic.name}, {"topic_short_description", topic.description}})
      .normalized;
}

struct SemanticDiversity {
  double value = 1.0;
  std::vector<int> component;  // per topic
  std::vector<std::pair<int, int>> edges;
  std::vector<std::tuple<int, int, int>> raw_scores;  // (i, j, raw)
};

// Components of the "semantically equivalent" graph over the topic count.
inline SemanticDiversity semantic_diversity_from_edges(int n_topics, const std::vector<std::pair<int, int>>& edges) {
  if (n_topics < 1) throw DataError("semantic diversity needs at least one topic");
  detail::UnionFind uf(static_cast<std::size_t>(n_topics));
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n_topics || b >= n_topics) throw DataError("edge references an unknown topic");
    uf.unite(a, b);
  }
  SemanticDiversity out;
  out.edges = edges;
  out.component.resize(n_topics);
  for (int i = 0; i < n_topics; ++i) out.component[i] = uf.find(i);
  detail::canonical_labels(out.component);
  std::set<int> roots(out.component.begin(), out.component.end());
  out.value = static_cast<double>(roots.size()) / static_cast<double>(n_topics);
  return out;
}

inline SemanticDiversity semantic_topic_diversity(LlmClient& llm, const std::vector<EvalTopic>& topics, int edge_threshold = 9) {
  const int n = static_cast<int>(topics.size());
  if (n < 1) throw DataError("semantic diversity needs at least one topic");
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  auto raws = parallel_map(pairs.size(), llm.options().max_in_flight, [&](std::size_t p) {
    const auto& a = topics[pairs[p].first];
    const auto& b = topics[pairs[p].second];
    return judge(llm, semantic_similarity_rubric(),
                 {{"topic_name_1", a.name}, {"topic_short_description_1", a.description},
                  {"topic_name_2", b.name}, {"topic_short_description_2", b.description}})
        .raw;
  });
  std::vector<std::pair<int, int>> edges;
  for (std::size_t p = 0; p < pairs.size(); ++p)
    if (raws[p] >= edge_threshold) edges.push_back(pairs[p]);
  auto out = semantic_diversity_from_edges(n, edges);
  for (std::size_t p = 0; p < pairs.size(); ++p) out.raw_scores.emplace_back(pairs[p].first, pairs[p].second, raws[p]);
  return out;
}

struct EvaluationSettings {
  std::size_t alignment_sample = 30;
  std::uint64_t seed = 0;
  int semantic_edge_threshold = 9;
  TokenMode token_mode = TokenMode::words;
};

inline json to_json(const EvaluationSettings& s) {
  return {{"alignment_sample", s.alignment_sample},
          {"seed", s.seed},
          {"semantic_edge_threshold", s.semantic_edge_threshold},
          {"token_mode", s.token_mode == TokenMode::words ? "words" : "char_bigrams"}};
}

inline const std::vector<std::string>& metric_ids() {
  static const std::vector<std::string> ids{"topic_label_alignment", "npmi", "semantic_topic_diversity",
                                            "bow_topic_diversity", "specificity", "polarity_stance_consistency"};
  return ids;
}

// All six metrics for one topic model.  NPMI uses `reference_texts` (the
// slice's passages) as its reference corpus.
inline std::vector<MetricReport> evaluate_topics(LlmClient& llm, const std::vector<EvalTopic>& topics,
                                                 const std::vector<std::string>& reference_texts,
                                                 const EvaluationSettings& s = {}) {
  if (topics.empty()) throw DataError("no topics to evaluate");
  const json cfg = to_json(s);
  std::vector<MetricReport> out;

  MetricReport align{"topic_label_alignment"};
  std::vector<double> vals;
  for (const auto& t : topics) {
    vals.push_back(topic_label_alignment(llm, t, s.alignment_sample, s.seed));
    align.items.emplace_back(t.id, vals.back());
  }
  align.aggregate = mean_of(vals);
  align.n_evaluated = topics.size();
  align.config = cfg;
  out.push_back(align);

  std::vector<std::vector<std::string>> words, docs;
  for (const auto& t : topics) words.push_back(t.top_words);
  for (const auto& d : reference_texts) docs.push_back(tokenize(d, s.token_mode));
  auto npmi = npmi_coherence(words, docs);
  MetricReport np{"npmi"};
  for (std::size_t i = 0; i < topics.size(); ++i) np.items.emplace_back(topics[i].id, npmi.per_topic[i]);
  np.aggregate = npmi.mean;
  np.n_evaluated = topics.size();
  np.config = cfg;
  np.details = {{"pairs_evaluated", npmi.pairs_evaluated}, {"pairs_skipped", npmi.pairs_skipped}};
  out.push_back(np);

  auto sem = semantic_topic_diversity(llm, topics, s.semantic_edge_threshold);
  MetricReport sd{"semantic_topic_diversity"};
  for (auto [i, j, raw] : sem.raw_scores) sd.items.emplace_back(topics[i].id + "|" + topics[j].id, raw / 10.0);
  sd.aggregate = sem.value;
  sd.n_evaluated = sem.raw_scores.size();
  sd.config = cfg;
  sd.details = {{"components", sem.component}, {"edges", sem.edges.size()}};
  out.push_back(sd);

  MetricReport bow{"bow_topic_diversity"};
  bow.aggregate = bow_topic_diversity(words);
  bow.n_evaluated = topics.size();
  bow.config = cfg;
  out.push_back(bow);

  MetricReport spec{"specificity"}, cons{"polarity_stance_consistency"};
  auto judged = parallel_map(topics.size(), llm.options().max_in_flight, [&](std::size_t i) {
    return std::array<double, 2>{specificity(llm, topics[i]), polarity_stance_consistency(llm, topics[i])};
  });
  std::vector<double> sv, cv;
  for (std::size_t i = 0; i < topics.size(); ++i) {
    spec.items.emplace_back(topics[i].id, judged[i][0]);
    cons.items.emplace_back(topics[i].id, judged[i][1]);
    sv.push_back(judged[i][0]);
    cv.push_back(judged[i][1]);
  }
  spec.aggregate = mean_of(sv);
  cons.aggregate = mean_of(cv);
  spec.n_evaluated = cons.n_evaluated = topics.size();
  spec.config = cons.config = cfg;
  out.push_back(spec);
  out.push_back(cons);
  return out;
}

// ---------------------------------------------------------------------------
// Inter-rater agreement

struct IccResult {
  double icc = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ms_rows = 0.0, ms_cols = 0.0, ms_error = 0.0;
  int n = 0, k = 0;
};

struct DegenerateRatings : DataError {
  explicit DegenerateRatings(const std::string& what) : DataError("ICC undetermined: " + what) {}
};

// Two-way random effects, average of k raters: ICC(2,k).  The 95% interval
// uses the F-based bounds for the single-rater coefficient, stepped up to k
// raters with the Spearman-Brown formula.
inline IccResult icc_2k(const Matrix& ratings, double alpha = 0.05) {
  const int n = static_cast<int>(ratings.rows()), k = static_cast<int>(ratings.cols());
  if (n < 3) throw DataError("ICC needs at least three targets");
  if (k < 2) throw DataError("ICC needs at least two raters");
  if (!ratings.allFinite()) throw DataError("ICC ratings contain missing or non-finite cells");

  const double grand = ratings.mean();
  const Vector row_means = ratings.rowwise().mean();
  const Eigen::RowVectorXd col_means = ratings.colwise().mean();
  const double ss_total = (ratings.array() - grand).square().sum();
  const double ss_rows = k * (row_means.array() - grand).square().sum();
  const double ss_cols = n * (col_means.array() - grand).square().sum();
  const double ss_error = ss_total - ss_rows - ss_cols;
  if (ss_total <= 0.0) throw DegenerateRatings("all ratings are equal");

  IccResult r;
  r.n = n;
  r.k = k;
  r.ms_rows = ss_rows / (n - 1);
  r.ms_cols = ss_cols / (k - 1);
  r.ms_error = std::max(0.0, ss_error) / ((n - 1.0) * (k - 1.0));
  const double msr = r.ms_rows, msc = r.ms_cols, mse = r.ms_error;
  const double denom = msr + (msc - mse) / n;
  if (denom <= 0.0) throw DegenerateRatings("no between-target variance");
  r.icc = (msr - mse) / denom;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.ci_low = r.ci_high = nan;
  if (mse > 0.0) {
    const double single = (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n);
    const double fj = msc / mse;
    const double a = n * (1 + (k - 1) * single) - k * single;
    const double vn = (k - 1) * (n - 1) * std::pow(k * single * fj + a, 2);
    const double vd = (n - 1) * k * k * single * single * fj * fj + a * a;
    const double v = vn / vd;
    if (std::isfinite(v) && v > 0) {
      namespace bm = boost::math;
      const double f_up = bm::quantile(bm::fisher_f(n - 1.0, v), 1 - alpha / 2);
      const double f_lo = bm::quantile(bm::fisher_f(v, n - 1.0), 1 - alpha / 2);
      const double lo = n * (msr - f_up * mse) / (f_up * (k * msc + (k * n - k - n) * mse) + n * msr);
      const double hi = n * (f_lo * msr - mse) / (k * msc + (k * n - k - n) * mse + n * f_lo * msr);
      auto step_up = [k](double x) { return x * k / (1 + x * (k - 1)); };
      r.ci_low = step_up(lo);
      r.ci_high = step_up(hi);
    }
  } else {
    r.ci_low = r.ci_high = r.icc;
  }
  return r;
}

inline IccResult icc_2_2(const Matrix& ratings) {
  if (ratings.cols() != 2) throw DataError("ICC(2,2) expects exactly two rater columns");
  return icc_2k(ratings);
}

// CSV with a header naming the two rater columns (e.g. judge,human).
inline Matrix load_ratings(const std::filesystem::path& path) {
  auto rows = csv::parse(read_file(path));
  if (rows.size() < 2) throw DataError("ratings file has no data rows");
  const auto& header = rows[0].second;
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] != "id" && header[c] != "target") cols.push_back(c);
  if (cols.size() < 2) throw ConfigError("ratings file needs two rater columns");
  Matrix m(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line, fields] = rows[r];
    if (fields.size() != header.size()) throw ParseError("expected " + std::to_string(header.size()) + " fields", line);
    for (std::size_t c = 0; c < cols.size(); ++c) m(r - 1, c) = detail::parse_real(fields[cols[c]], header[cols[c]], line);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Tmin / Tmid / Tmax tables

// Rows are (slice, model); columns are metric x granularity.  The largest
// value of each (slice, metric, granularity) across models is marked.
class MetricTable {
 public:
  MetricTable(std::vector<std::string> metrics, std::vector<std::string> models,
              std::vector<std::string> granularities = {"Tmin", "Tmid", "Tmax"})
      : metrics_(std::move(metrics)), models_(std::move(models)), grains_(std::move(granularities)) {}

  void set(const std::string& slice, const std::string& model, const std::string& metric, const std::string& grain,
           double value) {
    if (std::find(slices_.begin(), slices_.end(), slice) == slices_.end()) slices_.push_back(slice);
    values_[{slice, model, metric, grain}] = value;
  }

  std::optional<double> get(const std::string& slice, const std::string& model, const std::string& metric,
                            const std::string& grain) const {
    auto it = values_.find({slice, model, metric, grain});
    if (it == values_.end() || std::isnan(it->second)) return std::nullopt;
    return it->second;
  }

  bool is_max(const std::string& slice, const std::string& model, const std::string& metric, const std::string& grain) const {
    auto v = get(slice, model, metric, grain);
    if (!v) return false;
    for (const auto& m : models_) {
      auto o = get(slice, m, metric, grain);
      if (o && *o > *v + 1e-12) return false;
    }
    return true;
  }

  std::string csv(int precision = 3) const { return render(precision, false); }
  std::string markdown(int precision = 3) const { return render(precision, true); }

  const std::vector<std::string>& slices() const { return slices_; }
  const std::vector<std::string>& metrics() const { return metrics_; }
  const std::vector<std::string>& granularities() const { return grains_; }

 private:
  static std::pair<std::string, std::string> split_slice(const std::string& s) {
    auto us = s.rfind('_');
    if (us == std::string::npos) return {s, ""};
    return {s.substr(0, us), s.substr(us + 1)};
  }

  std::string render(int precision, bool md) const {
    std::ostringstream os;
    std::vector<std::string> head{"type", "char", "model"};
    for (const auto& m : metrics_)
      for (const auto& g : grains_) head.push_back(m + ":" + g);
    auto emit = [&](const std::vector<std::string>& cells) {
      if (md) {
        os << "|";
        for (const auto& c : cells) os << " " << c << " |";
      } else {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv::escape(cells[i]);
      }
      os << "\n";
    };
    emit(head);
    if (md) {
      std::vector<std::string> rule(head.size(), "---");
      emit(rule);
    }
    for (const auto& slice : slices_) {
      auto [type, chr] = split_slice(slice);
      for (const auto& model : models_) {
        std::vector<std::string> cells{type, chr, model};
        for (const auto& metric : metrics_)
          for (const auto& g : grains_) {
            auto v = get(slice, model, metric, g);
            if (!v) {
              cells.push_back(md ? "–" : "");
              continue;
            }
            std::ostringstream num;
            num << std::fixed << std::setprecision(precision) << *v;
            cells.push_back(is_max(slice, model, metric, g) ? "**" + num.str() + "**" : num.str());
          }
        emit(cells);
      }
    }
    return os.str();
  }

  std::vector<std::string> metrics_, models_, grains_, slices_;
  std::map<std::tuple<std::string, std::string, std::string, std::string>, double> values_;
};

}  // namespace topicflow
