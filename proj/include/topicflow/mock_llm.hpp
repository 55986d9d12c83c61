#pragma once

// Offline LLM providers: a scripted provider for unit tests and a
// deterministic lexicon-driven provider used as the default mock backend.

#include <atomic>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "topicflow/llm.hpp"

namespace topicflow {

// Replies from per-template queues of canned responses (the last one
// repeats), optionally after a handler gets first refusal.
class ScriptedLlmProvider : public LlmProvider {
 public:
  using Handler = std::function<std::optional<std::string>(const LlmRequest&)>;

  explicit ScriptedLlmProvider(std::string id = "scripted-mock") : id_(std::move(id)) {}

  std::string model_id() const override { return id_; }

  ScriptedLlmProvider& respond(TemplateId t, std::string response) {
    std::lock_guard lock(mutex_);
    canned_[t].push_back(std::move(response));
    return *this;
  }

  ScriptedLlmProvider& on(Handler h) {
    std::lock_guard lock(mutex_);
    handlers_.push_back(std::move(h));
    return *this;
  }

  // Next `n` calls throw a retryable transport error.
  void fail_next(int n) { failures_ = n; }

  std::string complete(const LlmRequest& request) override {
    ++calls_;
    if (failures_ > 0) {
      --failures_;
      throw TransportError("scripted transport failure");
    }
    std::lock_guard lock(mutex_);
    for (auto& h : handlers_)
      if (auto r = h(request)) return *r;
    auto it = canned_.find(request.template_id);
    if (it == canned_.end() || it->second.empty())
      throw TransportError("no canned response for " + to_string(request.template_id), false);
    std::string r = it->second.front();
    if (it->second.size() > 1) it->second.pop_front();
    return r;
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  std::string id_;
  std::mutex mutex_;
  std::map<TemplateId, std::deque<std::string>> canned_;
  std::vector<Handler> handlers_;
  std::atomic<int> failures_{0};
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------

struct PolarityLexicon {
  std::set<std::string> positive{"fast",   "quick",    "rapid",   "clear",   "supportive", "good",  "strong",
                                 "decisive", "open",   "kind",    "helpful", "proactive",  "fair",  "excellent",
                                 "great",  "frequent", "prompt",  "calm",    "generous",   "honest"};
  std::set<std::string> negative{"slow",  "delayed", "unclear", "unsupportive", "bad",    "weak",   "indecisive",
                                 "closed", "harsh",  "unhelpful", "passive",    "unfair", "poor",   "terrible",
                                 "lack",  "rare",    "late",    "angry",        "stingy", "dishonest"};

  // +1 positive, -1 negative, 0 neutral or mixed.
  int polarity(const std::vector<std::string>& tokens) const {
    int p = 0, n = 0;
    for (const auto& t : tokens) {
      p += positive.count(t);
      n += negative.count(t);
    }
    return p > n ? 1 : (n > p ? -1 : 0);
  }
  bool mixed(const std::vector<std::string>& tokens) const {
    bool p = false, n = false;
    for (const auto& t : tokens) {
      p = p || positive.count(t);
      n = n || negative.count(t);
    }
    return p && n;
  }
  bool is_marker(const std::string& t) const { return positive.count(t) || negative.count(t); }
};

// Deterministic stand-in for a chat model.  Every template is answered from
// the request bindings with keyword and polarity-lexicon rules, so pipelines
// run fully offline and reproducibly.
class HeuristicLlmProvider : public LlmProvider {
 public:
  explicit HeuristicLlmProvider(PolarityLexicon lexicon = {}) : lex_(std::move(lexicon)) {}

  std::string model_id() const override { return "heuristic-mock-1"; }

  std::string complete(const LlmRequest& r) override {
    ++calls_;
    switch (r.template_id) {
      case TemplateId::extract: return extract(r.bindings.at("input_text"));
      case TemplateId::name_topic: return name(r.bindings);
      case TemplateId::assign_topics: return assign(r.bindings);
      case TemplateId::polarity_split: return split(r.bindings);
      case TemplateId::child_assign: return child(r.bindings);
      case TemplateId::judge: return judge_score(r);
    }
    throw TransportError("unsupported template", false);
  }

  std::size_t calls() const { return calls_.load(); }

  // Content words: tokens minus stopwords and polarity markers.
  std::vector<std::string> content_words(const std::string& text) const {
    std::vector<std::string> out;
    for (auto& t : tokenize(text))
      if (!stopwords().count(t) && !lex_.is_marker(t)) out.push_back(t);
    return out;
  }

  const PolarityLexicon& lexicon() const { return lex_; }

 private:
  static const std::set<std::string>& stopwords() {
    static const std::set<std::string> s{"the",  "a",    "an",    "and",   "or",    "of",       "to",    "in",
                                         "on",   "for",  "with",  "is",    "are",   "was",      "were",  "be",
                                         "our",  "my",   "his",   "her",   "their", "they",     "he",    "she",
                                         "it",   "this", "that",  "about", "at",    "passages", "stance", "by",
                                         "very", "always", "often", "we",  "us",    "from",     "as",    "has",
                                         "have", "had",  "not",   "no"};
    return s;
  }

  static std::vector<std::string> lines_of(const std::string& block) {
    std::vector<std::string> out;
    std::istringstream is(block);
    for (std::string line; std::getline(is, line);) {
      line = trim(line);
      if (line.rfind("- ", 0) == 0) line = line.substr(2);
      if (!line.empty()) out.push_back(line);
    }
    return out;
  }

  struct ParsedDef {
    int id;
    std::string name;
    std::string description;
  };

  static std::vector<ParsedDef> parse_defs(const std::string& block) {
    std::vector<ParsedDef> defs;
    for (const auto& line : lines_of(block)) {
      auto comma = line.find(", ");
      if (comma == std::string::npos) continue;
      ParsedDef d;
      d.id = std::stoi(line.substr(0, comma));
      auto rest = line.substr(comma + 2);
      auto paren = rest.find(" (");
      d.name = paren == std::string::npos ? rest : rest.substr(0, paren);
      d.description = paren == std::string::npos ? "" : rest.substr(paren + 2, rest.size() - paren - 3);
      defs.push_back(std::move(d));
    }
    return defs;
  }

  static std::string jstr(const json& j) { return j.dump(); }

  std::string most_frequent_marker(const std::vector<std::string>& docs, int sign) const {
    std::map<std::string, int> counts;
    const auto& set = sign > 0 ? lex_.positive : lex_.negative;
    for (const auto& d : docs)
      for (const auto& t : tokenize(d))
        if (set.count(t)) ++counts[t];
    std::string best;
    int best_n = 0;
    for (const auto& [w, n] : counts)
      if (n > best_n) best = w, best_n = n;
    return best.empty() ? (sign > 0 ? "good" : "poor") : best;
  }

  std::string extract(const std::string& text) const {
    static const std::vector<std::string> top{"ceo", "president", "executive", "executives", "chairman", "founder"};
    static const std::vector<std::string> non_top{"manager", "managers", "supervisor", "boss", "director", "leader",
                                                  "chief"};
    static const std::vector<std::string> unknown{"leadership", "management", "someone"};
    static const std::set<std::string> ability{"skill", "skills", "skilled", "competent", "incompetent", "ability",
                                               "capable", "knowledge", "experienced", "inexperienced", "expertise"};
    static const std::set<std::string> attitude{"attitude", "cares", "listens", "respects", "arrogant", "passionate",
                                                "motivated", "humble", "indifferent", "enthusiastic"};
    static const std::set<std::string> behavior{"decides", "decide", "decisions", "makes", "holds", "gives",
                                                "reviews", "approves", "delays", "interrupts", "meets", "praises",
                                                "shares", "checks", "assigns", "supports", "ignores", "explains"};
    json out{{"extractions", json::array()}};
    std::string sentence;
    auto flush = [&] {
      auto s = trim(sentence);
      sentence.clear();
      if (s.empty()) return;
      auto toks = tokenize(s);
      auto has = [&](const std::vector<std::string>& keys) {
        for (const auto& t : toks)
          if (std::find(keys.begin(), keys.end(), t) != keys.end()) return true;
        return false;
      };
      std::string layer;
      if (has(top)) layer = "top";
      else if (has(non_top)) layer = "non_top";
      else if (has(unknown)) layer = "unknown";
      else return;
      std::string element = "other";
      for (const auto& t : toks) {
        if (ability.count(t)) { element = "ability"; break; }
        if (attitude.count(t)) { element = "attitude"; break; }
        if (behavior.count(t)) { element = "behavior"; break; }
      }
      out["extractions"].push_back({{"text", s},
                                    {"target_leader_layer", layer},
                                    {"element_type", element},
                                    {"implicit_extraction", false},
                                    {"change_meaning", false},
                                    {"is_past", std::find(toks.begin(), toks.end(), "used") != toks.end()}});
    };
    for (char c : text) {
      sentence.push_back(c);
      if (c == '.' || c == '!' || c == '?' || c == '\n') flush();
    }
    flush();
    return jstr(out);
  }

  std::string name(const Bindings& b) const {
    auto docs = lines_of(b.at("topic_representative_documents"));
    int pos = 0, neg = 0;
    for (const auto& d : docs) {
      int p = lex_.polarity(tokenize(d));
      pos += p > 0;
      neg += p < 0;
    }
    int sign = 0;
    if (pos + neg > 0 && 2 * (pos + neg) >= static_cast<int>(docs.size())) {
      if (pos >= 0.8 * (pos + neg)) sign = 1;
      else if (neg >= 0.8 * (pos + neg)) sign = -1;
    }
    std::vector<std::string> words;
    std::istringstream is(b.at("topic_top_words"));
    for (std::string w; std::getline(is, w, ',');) {
      w = trim(w);
      if (!w.empty() && !lex_.is_marker(w) && !stopwords().count(w)) words.push_back(w);
    }
    if (words.empty()) words.push_back("general");
    std::string name = sign ? most_frequent_marker(docs, sign) + " " : "";
    for (std::size_t i = 0; i < std::min<std::size_t>(2, words.size()); ++i) name += (i ? " " : "") + words[i];
    std::string desc = "Passages about";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, words.size()); ++i) desc += " " + words[i];
    return jstr({{"topic_name", name}, {"topic_short_description", desc}});
  }

  std::string assign(const Bindings& b) const {
    auto defs = parse_defs(b.at("topic_definitions"));
    auto doc_tokens = tokenize(b.at("input_text"));
    std::set<std::string> doc(doc_tokens.begin(), doc_tokens.end());
    int doc_pol = lex_.polarity(doc_tokens);
    std::vector<std::pair<int, std::size_t>> scored;
    std::size_t best = 0;
    for (const auto& d : defs) {
      int topic_pol = lex_.polarity(tokenize(d.name));
      if (topic_pol != 0 && doc_pol != 0 && topic_pol != doc_pol) continue;
      if (topic_pol != 0 && doc_pol == 0) continue;
      std::set<std::string> kw;
      for (auto& w : content_words(d.name + " " + d.description)) kw.insert(w);
      std::size_t s = 0;
      for (const auto& w : kw) s += doc.count(w);
      if (s >= 2) {
        scored.emplace_back(d.id, s);
        best = std::max(best, s);
      }
    }
    json list = json::array();
    for (const auto& [id, s] : scored)
      if (s == best) list.push_back({{"topic_id", id}, {"topic_name", ""}, {"reason", "keyword overlap " + std::to_string(s)}});
    if (list.empty()) list.push_back({{"topic_id", -1}, {"topic_name", "Other"}, {"reason", "no topic matches"}});
    return jstr({{"topic_list", list}});
  }

  std::string split(const Bindings& b) const {
    auto docs = lines_of(b.at("topic_documents"));
    int pos = 0, neg = 0;
    for (const auto& d : docs) {
      int p = lex_.polarity(tokenize(d));
      pos += p > 0;
      neg += p < 0;
    }
    int polar = pos + neg;
    int floor_count = std::max(1, static_cast<int>(0.2 * polar));
    if (pos < floor_count || neg < floor_count) return jstr({{"contain_opposing_stance", false}, {"child_topics", json::array()}});
    std::string base;
    for (auto& w : content_words(b.at("topic_name"))) base += (base.empty() ? "" : " ") + w;
    if (base.empty()) base = "topic";
    std::string desc = b.at("topic_short_description");
    json children = json::array();
    for (int sign : {1, -1}) {
      auto marker = most_frequent_marker(docs, sign);
      children.push_back({{"child_topic_name", marker + " " + base},
                          {"child_topic_short_description", desc + " (" + marker + ")"},
                          {"document_examples", ""},
                          {"opposing_stance_reason", sign > 0 ? "favourable reports" : "unfavourable reports"}});
    }
    return jstr({{"contain_opposing_stance", true}, {"child_topics", children}});
  }

  std::string child(const Bindings& b) const {
    auto defs = parse_defs(b.at("child_topic_definition"));
    int doc_pol = lex_.polarity(tokenize(b.at("input_text")));
    int chosen = -1;
    if (doc_pol != 0)
      for (const auto& d : defs)
        if (lex_.polarity(tokenize(d.name)) == doc_pol) {
          chosen = d.id;
          break;
        }
    return jstr({{"topic_id", chosen}, {"topic_name", chosen == -1 ? "Other" : ""}, {"reason", "polarity match"}});
  }

  std::string judge_score(const LlmRequest& r) const {
    const auto& b = r.bindings;
    int score = 0;
    switch (*r.rubric) {
      case RubricId::stance_similarity: {
        int p1 = lex_.polarity(tokenize(b.at("topic_name_1")));
        int p2 = lex_.polarity(tokenize(b.at("topic_name_2")));
        if (p1 && p2) score = p1 == p2 ? 0 : 10;
        else if (p1 || p2) score = 5;
        else score = 2;
        break;
      }
      case RubricId::semantic_similarity: {
        const auto a = b.at("topic_name_1") + " " + b.at("topic_short_description_1");
        const auto c = b.at("topic_name_2") + " " + b.at("topic_short_description_2");
        if (a == c) {
          score = 10;
          break;
        }
        auto ta = tokenize(a), tc = tokenize(c);
        std::set<std::string> sa(ta.begin(), ta.end()), sc(tc.begin(), tc.end());
        std::size_t inter = 0;
        for (const auto& w : sa) inter += sc.count(w);
        double jac = static_cast<double>(inter) / static_cast<double>(sa.size() + sc.size() - inter);
        score = std::min(8, static_cast<int>(std::lround(10.0 * jac)));
        if (lex_.polarity(ta) * lex_.polarity(tc) < 0) score = std::min(score, 5);
        break;
      }
      case RubricId::label_alignment: {
        auto kw_list = content_words(b.at("topic_name") + " " + b.at("topic_short_description"));
        std::set<std::string> kw(kw_list.begin(), kw_list.end());
        auto doc_tokens = tokenize(b.at("document"));
        std::set<std::string> doc(doc_tokens.begin(), doc_tokens.end());
        std::size_t hit = 0;
        for (const auto& w : kw) hit += doc.count(w);
        score = kw.empty() ? 0 : static_cast<int>(std::lround(10.0 * hit / kw.size()));
        int tp = lex_.polarity(tokenize(b.at("topic_name")));
        if (tp != 0 && lex_.polarity(doc_tokens) == -tp) score = std::min(score, 3);
        break;
      }
      case RubricId::specificity: {
        auto words = content_words(b.at("topic_name"));
        std::set<std::string> distinct(words.begin(), words.end());
        score = std::min<int>(10, 2 * static_cast<int>(distinct.size()) +
                                      (tokenize(b.at("topic_short_description")).size() >= 6 ? 2 : 0));
        break;
      }
      case RubricId::stance_consistency: {
        auto toks = tokenize(b.at("topic_name"));
        if (lex_.mixed(toks)) score = 1;
        else if (lex_.polarity(toks) != 0) score = 10;
        else score = 4;
        break;
      }
    }
    return jstr({{"score", score}, {"reason", "heuristic " + to_string(*r.rubric)}});
  }

  PolarityLexicon lex_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace topicflow
