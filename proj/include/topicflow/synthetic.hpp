#pragma once

#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "topicflow/corpus.hpp"
#include "topicflow/mock_llm.hpp"

namespace topicflow {

// Review-like documents whose leader sentences come from two themes x two
// polarities per slice, plus a firm-year panel in which morale falls with
// the share of the first theme's negative cell in the first slice.  Return
// on assets carries a smaller effect of the same share.
struct SyntheticCorpusOptions {
  std::uint64_t seed = 0;
  int n_documents = 800;
  int n_firms = 20;
  int first_year = 2015;
  int n_years = 5;
  std::vector<SliceKey> slices{{LeaderType::non_top, Characteristic::behavior}, {LeaderType::top, Characteristic::behavior}};
  double morale_effect = -2.0;
  double roa_effect = -0.1;
  double noise = 0.3;
};

struct SyntheticCorpus {
  std::vector<Document> documents;
  std::vector<PanelRow> panel;
  std::map<std::string, std::string> truth;  // doc id -> "<slice>/<theme>/<polarity>"
};

inline const std::vector<std::vector<std::string>>& synthetic_themes() {
  static const std::vector<std::vector<std::string>> themes{
      {"meeting", "agenda", "schedule", "weekly", "discussion", "minutes", "presentation"},
      {"salary", "bonus", "raise", "compensation", "payroll", "promotion", "evaluation"}};
  return themes;
}

inline SyntheticCorpus make_synthetic_corpus(const SyntheticCorpusOptions& opt = {}) {
  if (opt.slices.empty() || opt.n_documents < 1 || opt.n_firms < 1 || opt.n_years < 1)
    throw ConfigError("synthetic corpus needs documents, firms, years and slices");
  const PolarityLexicon lex;
  const std::vector<std::string> pos(lex.positive.begin(), lex.positive.end());
  const std::vector<std::string> neg(lex.negative.begin(), lex.negative.end());
  const std::vector<std::string> filler{"The office is close to the station.", "Overtime is common in spring.",
                                        "The cafeteria serves lunch.", "Training lasts two weeks."};
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);

  const int n_cells = opt.n_firms * opt.n_years;
  std::vector<double> negativity(n_cells);
  for (auto& q : negativity) q = 0.15 + 0.6 * u(rng);
  std::vector<int> target_hits(n_cells, 0), first_slice_docs(n_cells, 0), docs_per_cell(n_cells, 0);

  SyntheticCorpus out;
  const auto& themes = synthetic_themes();
  for (int d = 0; d < opt.n_documents; ++d) {
    const int cell = static_cast<int>(rng() % n_cells);
    const int firm = cell / opt.n_years, year = opt.first_year + cell % opt.n_years;
    const std::size_t slice = rng() % opt.slices.size();
    const int theme = static_cast<int>(rng() % themes.size());
    const bool negative = u(rng) < negativity[cell];
    const SliceKey key = opt.slices[slice];

    auto words = themes[theme];
    std::shuffle(words.begin(), words.end(), rng);
    const auto& markers = negative ? neg : pos;
    std::string sentence = key.leader_type == LeaderType::top ? "The ceo" : "My manager";
    sentence += key.characteristic == Characteristic::behavior   ? " holds"
                : key.characteristic == Characteristic::attitude ? " cares about"
                                                                 : " is skilled at";
    for (int w = 0; w < 5; ++w) sentence += " " + words[w];
    for (int m = 0; m < 2; ++m) sentence += " " + markers[rng() % markers.size()];
    sentence += ".";

    Document doc;
    char id[32];
    std::snprintf(id, sizeof id, "d%05d", d);
    doc.doc_id = id;
    doc.text = filler[rng() % filler.size()] + " " + sentence;
    char firm_id[16];
    std::snprintf(firm_id, sizeof firm_id, "F%03d", firm);
    doc.firm_id = firm_id;
    doc.year = year;
    out.truth[doc.doc_id] = to_string(key) + "/" + std::to_string(theme) + "/" + (negative ? "neg" : "pos");
    out.documents.push_back(std::move(doc));

    ++docs_per_cell[cell];
    if (slice == 0) {
      ++first_slice_docs[cell];
      target_hits[cell] += theme == 0 && negative;
    }
  }

  const std::vector<std::string> industries{"retail", "services", "manufacturing"};
  std::map<std::pair<int, int>, double> shock;
  for (int y = 0; y < opt.n_years; ++y)
    for (int i = 0; i < static_cast<int>(industries.size()); ++i) shock[{y, i}] = 0.2 * z(rng);
  for (int cell = 0; cell < n_cells; ++cell) {
    const int firm = cell / opt.n_years, y = cell % opt.n_years;
    const int ind = firm % static_cast<int>(industries.size());
    const double share = first_slice_docs[cell] ? static_cast<double>(target_hits[cell]) / first_slice_docs[cell] : 0.0;
    PanelRow row;
    char firm_id[16];
    std::snprintf(firm_id, sizeof firm_id, "F%03d", firm);
    row.firm_id = firm_id;
    row.year = opt.first_year + y;
    row.industry = industries[ind];
    row.employees = 100 + static_cast<long long>(rng() % 5000);
    row.morale = 3.5 + opt.morale_effect * share + shock[{y, ind}] + opt.noise * z(rng);
    row.roa = 0.04 + opt.roa_effect * share + 0.05 * shock[{y, ind}] + 0.02 * opt.noise * z(rng);
    out.panel.push_back(row);
  }
  return out;
}

}  // namespace topicflow
