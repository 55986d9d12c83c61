#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topicflow/corpus.hpp"
#include "topicflow/mock_llm.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "tf") {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" +
             std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline Eigen::MatrixXd gaussian(int rows, int cols, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline Eigen::MatrixXd uniform(int rows, int cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

// Random metric: Euclidean distances between random points.
inline Eigen::MatrixXd random_metric(int k, std::uint64_t seed, int dim = 3) {
  Eigen::MatrixXd p = uniform(k, dim, seed);
  Eigen::MatrixXd d(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) d(i, j) = (p.row(i) - p.row(j)).norm();
  return d;
}

// Two themes x two polarities with separate vocabularies.  Each passage
// draws five theme words and two polarity markers of its cell.
struct PlantedCorpus {
  topicflow::CorpusSlice slice;
  std::map<std::string, int> cell;  // passage id -> theme * 2 + (negative ? 1 : 0)
};

inline const std::vector<std::vector<std::string>>& planted_themes() {
  static const std::vector<std::vector<std::string>> themes{
      {"meeting", "agenda", "schedule", "weekly", "discussion", "minutes", "presentation"},
      {"salary", "bonus", "raise", "compensation", "payroll", "promotion", "evaluation"}};
  return themes;
}

inline PlantedCorpus make_planted_corpus(std::uint64_t seed, int per_cell = 100) {
  const topicflow::PolarityLexicon lex;
  const std::vector<std::string> pos(lex.positive.begin(), lex.positive.end());
  const std::vector<std::string> neg(lex.negative.begin(), lex.negative.end());
  const auto& themes = planted_themes();
  std::mt19937_64 rng(seed);
  PlantedCorpus out;
  out.slice.key = {topicflow::LeaderType::non_top, topicflow::Characteristic::behavior};
  int serial = 0;
  for (int theme = 0; theme < 2; ++theme)
    for (int polarity = 0; polarity < 2; ++polarity)
      for (int i = 0; i < per_cell; ++i) {
        auto words = themes[theme];
        std::shuffle(words.begin(), words.end(), rng);
        const auto& markers = polarity == 0 ? pos : neg;
        std::string text = "manager";
        for (int w = 0; w < 5; ++w) text += " " + words[w];
        for (int m = 0; m < 2; ++m) text += " " + markers[rng() % markers.size()];
        topicflow::LeaderPassage p;
        char id[32];
        std::snprintf(id, sizeof id, "r%04d#0", serial);
        p.passage_id = id;
        p.source_doc_id = std::string(id).substr(0, 5);
        p.text = text;
        p.leader_type = topicflow::LeaderType::non_top;
        p.characteristic = topicflow::Characteristic::behavior;
        p.firm_id = "F" + std::to_string(serial % 20);
        p.year = 2015 + serial % 5;
        out.cell[p.passage_id] = theme * 2 + polarity;
        out.slice.passages.push_back(std::move(p));
        ++serial;
      }
  // interleave cells so chunked stages see mixed input
  std::shuffle(out.slice.passages.begin(), out.slice.passages.end(), rng);
  return out;
}

// Firm-year panel whose demeaned outcomes load on topic 0 with slope `beta`.
// Each post joins each topic independently with a firm-year propensity.
struct SyntheticPanel {
  std::vector<topicflow::LeaderPassage> passages;
  std::map<int, std::set<std::string>> topics;
  std::vector<topicflow::PanelRow> panel;
};

inline SyntheticPanel make_synthetic_panel(std::uint64_t seed, double beta = 2.0, int n_firms = 60, int n_years = 5,
                                           int n_topics = 5, double noise = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> prop(0.05, 0.5);
  std::uniform_int_distribution<int> posts(4, 40);
  std::normal_distribution<double> z(0.0, 1.0);
  const std::vector<std::string> industries{"retail", "finance", "manufacturing"};
  SyntheticPanel out;
  for (int k = 0; k < n_topics; ++k) out.topics[k];
  std::map<std::pair<int, std::string>, double> shock;
  for (int y = 0; y < n_years; ++y)
    for (const auto& ind : industries) shock[{2015 + y, ind}] = z(rng);
  int serial = 0;
  for (int firm = 0; firm < n_firms; ++firm) {
    const std::string firm_id = "F" + std::to_string(firm);
    const std::string& industry = industries[firm % industries.size()];
    const double size = 4.0 + 4.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    for (int y = 0; y < n_years; ++y) {
      const int year = 2015 + y;
      std::vector<double> p(n_topics);
      for (auto& v : p) v = prop(rng);
      const int n = posts(rng);
      int in_topic0 = 0;
      for (int i = 0; i < n; ++i) {
        topicflow::LeaderPassage lp;
        lp.passage_id = "p" + std::to_string(serial++) + "#0";
        lp.source_doc_id = lp.passage_id.substr(0, lp.passage_id.size() - 2);
        lp.text = "synthetic";
        lp.firm_id = firm_id;
        lp.year = year;
        for (int k = 0; k < n_topics; ++k)
          if (std::uniform_real_distribution<double>(0, 1)(rng) < p[k]) {
            out.topics[k].insert(lp.passage_id);
            in_topic0 += k == 0;
          }
        out.passages.push_back(std::move(lp));
      }
      const double f0 = static_cast<double>(in_topic0) / n;
      topicflow::PanelRow row;
      row.firm_id = firm_id;
      row.year = year;
      row.industry = industry;
      row.employees = static_cast<long long>(std::exp(size));
      const double common = shock[{year, industry}];
      row.roa = common + beta * f0 + 0.1 * size + noise * z(rng);
      row.morale = 3.0 + common + beta * f0 + 0.05 * size + noise * z(rng);
      out.panel.push_back(row);
    }
  }
  return out;
}

// Delegates to the heuristic mock and fails hard once `budget` calls have
// been answered, like a process dying mid-stage.
class FailingProvider : public topicflow::LlmProvider {
 public:
  explicit FailingProvider(long budget) : budget_(budget) {}
  std::string model_id() const override { return inner_.model_id(); }
  std::string complete(const topicflow::LlmRequest& r) override {
    if (calls_++ >= budget_) throw topicflow::TransportError("provider went away", false);
    return inner_.complete(r);
  }
  long calls() const { return calls_.load(); }

 private:
  topicflow::HeuristicLlmProvider inner_;
  long budget_;
  std::atomic<long> calls_{0};
};

}  // namespace testing_support
