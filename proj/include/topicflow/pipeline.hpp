#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "topicflow/clustering.hpp"
#include "topicflow/common.hpp"
#include "topicflow/corpus.hpp"
#include "topicflow/embedding.hpp"
#include "topicflow/llm.hpp"
#include "topicflow/log.hpp"
#include "topicflow/parallel.hpp"
#include "topicflow/rubrics.hpp"

namespace topicflow {

enum class Stage { initial, named, reassigned, split, integrated };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::initial: return "initial";
    case Stage::named: return "named";
    case Stage::reassigned: return "reassigned";
    case Stage::split: return "split";
    case Stage::integrated: return "integrated";
  }
  return "?";
}

inline Stage parse_stage(const std::string& s) {
  for (auto st : {Stage::initial, Stage::named, Stage::reassigned, Stage::split, Stage::integrated})
    if (to_string(st) == s) return st;
  throw DataError("unknown stage '" + s + "'");
}

struct StageError : DataError {
  StageError(Stage want, Stage got)
      : DataError("expected a state at stage " + to_string(want) + ", got " + to_string(got)) {}
};

struct Topic {
  int topic_id = 0;
  std::string name;
  std::string description;
  std::set<std::string> members;
  std::vector<std::string> top_words;
  std::vector<std::string> representative_ids;
  std::optional<int> parent_id;  // set on polarity children
  std::vector<int> merged_from;  // set on topics produced by integration
  Stage stage = Stage::initial;

  TopicLabel label() const { return {name, description}; }
  bool operator==(const Topic&) const = default;
};

struct TopicModelState {
  std::string slice;
  Stage stage = Stage::initial;
  std::vector<Topic> topics;
  std::set<std::string> unassigned;
  json config = json::object();
  std::map<std::string, std::string> provenance;  // stage -> content hash
  json diagnostics = json::object();

  const Topic& topic(int id) const {
    for (const auto& t : topics)
      if (t.topic_id == id) return t;
    throw DataError("no topic with id " + std::to_string(id));
  }
};

struct RepresentationWeights {
  double name = 1.0 / 3.0;
  double description = 1.0 / 3.0;
  double documents = 1.0 / 3.0;

  void validate() const {
    if (name < 0 || description < 0 || documents < 0) throw ConfigError("representation weights must be non-negative");
    if (std::abs(name + description + documents - 1.0) > 1e-9) throw ConfigError("representation weights must sum to 1");
  }
};

struct PipelineConfig {
  int min_cluster_size = 100;
  int min_samples = 0;  // 0: same as min_cluster_size
  double variance_target = 0.90;
  int max_dim = 450;
  int pca_chunk = 1024;
  int embed_batch = 64;
  int top_words = 10;
  int n_representatives = 30;
  double mmr_lambda = 0.5;
  double rename_mmr_lambda = 0.0;
  int split_sample = 50;
  double tau_quantile = 0.01;
  RepresentationWeights weights;
  std::vector<int> n_clusters;  // empty: the Tmin/Tmid/Tmax grid
  std::uint64_t seed = 0;
  int assign_batch = 64;
  TokenMode token_mode = TokenMode::words;
  std::string corpus_meta = "Employee reviews of companies; each passage describes a leader.";
};

inline json to_json(const PipelineConfig& c) {
  return {{"min_cluster_size", c.min_cluster_size},
          {"min_samples", c.min_samples},
          {"variance_target", c.variance_target},
          {"max_dim", c.max_dim},
          {"pca_chunk", c.pca_chunk},
          {"embed_batch", c.embed_batch},
          {"top_words", c.top_words},
          {"n_representatives", c.n_representatives},
          {"mmr_lambda", c.mmr_lambda},
          {"rename_mmr_lambda", c.rename_mmr_lambda},
          {"split_sample", c.split_sample},
          {"tau_quantile", c.tau_quantile},
          {"weights", {c.weights.name, c.weights.description, c.weights.documents}},
          {"n_clusters", c.n_clusters},
          {"seed", c.seed},
          {"assign_batch", c.assign_batch},
          {"token_mode", c.token_mode == TokenMode::words ? "words" : "char_bigrams"},
          {"corpus_meta", c.corpus_meta}};
}

struct PipelineContext {
  LlmClient& llm;
  EmbeddingProvider& embedder;
  EmbeddingCache* embedding_cache = nullptr;
  PipelineConfig cfg;
};

// Embeddings, PCA and the reduced matrix for one slice.
class SliceWorkspace {
 public:
  SliceWorkspace(const CorpusSlice& slice, PipelineContext& ctx) : key_(slice.key), passages_(slice.passages), ctx_(ctx) {
    if (passages_.empty()) throw InsufficientData("slice " + to_string(key_) + " has no passages");
    std::vector<std::string> texts, ids;
    for (std::size_t i = 0; i < passages_.size(); ++i) {
      if (!index_.emplace(passages_[i].passage_id, i).second)
        throw DataError("duplicate passage id " + passages_[i].passage_id);
      texts.push_back(passages_[i].text);
      ids.push_back(passages_[i].passage_id);
    }
    embeddings_ = embed(texts, ctx.embedder, static_cast<std::size_t>(ctx.cfg.embed_batch), ids, ctx.embedding_cache);
    if (passages_.size() >= 2) {
      PcaOptions opt;
      opt.variance_target = ctx.cfg.variance_target;
      opt.max_dim = ctx.cfg.max_dim;
      opt.chunk_size = ctx.cfg.pca_chunk;
      pca_ = fit_pca(embeddings_.vectors, opt);
      reduced_ = transform(pca_, embeddings_.vectors);
    } else {
      reduced_ = embeddings_.vectors;
    }
  }

  const SliceKey& key() const { return key_; }
  const std::vector<LeaderPassage>& passages() const { return passages_; }
  const Matrix& reduced() const { return reduced_; }
  const PcaModel& pca() const { return pca_; }
  const EmbeddingMatrix& embeddings() const { return embeddings_; }

  std::size_t row(const std::string& passage_id) const {
    auto it = index_.find(passage_id);
    if (it == index_.end()) throw DataError("unknown passage id " + passage_id);
    return it->second;
  }
  bool contains(const std::string& passage_id) const { return index_.count(passage_id) > 0; }
  const LeaderPassage& passage(const std::string& id) const { return passages_[row(id)]; }

  Matrix rows(const std::vector<std::string>& ids) const {
    Matrix m(static_cast<Eigen::Index>(ids.size()), reduced_.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = reduced_.row(row(ids[i]));
    return m;
  }

  // Embeds arbitrary text into the reduced space of this slice.
  Vector reduce_text(const std::string& text) {
    std::lock_guard lock(mutex_);
    auto it = text_cache_.find(text);
    if (it != text_cache_.end()) return it->second;
    auto e = embed({text}, ctx_.embedder, 1, {}, ctx_.embedding_cache);
    Vector v = pca_.dim() > 0 ? transform(pca_, Vector(e.vectors.row(0).transpose())) : Vector(e.vectors.row(0).transpose());
    text_cache_.emplace(text, v);
    return v;
  }

 private:
  SliceKey key_;
  std::vector<LeaderPassage> passages_;
  PipelineContext& ctx_;
  std::map<std::string, std::size_t> index_;
  EmbeddingMatrix embeddings_;
  PcaModel pca_;
  Matrix reduced_;
  std::mutex mutex_;
  std::map<std::string, Vector> text_cache_;
};

// ---------------------------------------------------------------------------
// Serialization and provenance

inline json to_json(const Topic& t) {
  json j{{"topic_id", t.topic_id},
         {"name", t.name},
         {"description", t.description},
         {"members", t.members},
         {"top_words", t.top_words},
         {"representative_ids", t.representative_ids},
         {"parent_id", t.parent_id ? json(*t.parent_id) : json(nullptr)},
         {"merged_from", t.merged_from},
         {"stage", to_string(t.stage)}};
  return j;
}

inline Topic topic_from_json(const json& j) {
  Topic t;
  t.topic_id = j.at("topic_id").get<int>();
  t.name = j.at("name").get<std::string>();
  t.description = j.at("description").get<std::string>();
  t.members = j.at("members").get<std::set<std::string>>();
  t.top_words = j.at("top_words").get<std::vector<std::string>>();
  t.representative_ids = j.at("representative_ids").get<std::vector<std::string>>();
  if (!j.at("parent_id").is_null()) t.parent_id = j.at("parent_id").get<int>();
  t.merged_from = j.at("merged_from").get<std::vector<int>>();
  t.stage = parse_stage(j.at("stage").get<std::string>());
  return t;
}

inline json content_json(const TopicModelState& s) {
  json topics = json::array();
  for (const auto& t : s.topics) topics.push_back(to_json(t));
  return {{"slice", s.slice}, {"stage", to_string(s.stage)}, {"topics", topics}, {"unassigned", s.unassigned}};
}

inline std::string state_hash(const TopicModelState& s) { return content_hash(content_json(s)); }

inline json to_json(const TopicModelState& s) {
  json j = content_json(s);
  j["config"] = s.config;
  j["provenance"] = s.provenance;
  j["diagnostics"] = s.diagnostics;
  return j;
}

inline TopicModelState state_from_json(const json& j) {
  TopicModelState s;
  s.slice = j.at("slice").get<std::string>();
  s.stage = parse_stage(j.at("stage").get<std::string>());
  for (const auto& t : j.at("topics")) s.topics.push_back(topic_from_json(t));
  s.unassigned = j.at("unassigned").get<std::set<std::string>>();
  s.config = j.value("config", json::object());
  s.provenance = j.value("provenance", std::map<std::string, std::string>{});
  s.diagnostics = j.value("diagnostics", json::object());
  return s;
}

inline void advance(TopicModelState& s, Stage to) {
  if (static_cast<int>(to) != static_cast<int>(s.stage) + 1 && !(to == s.stage && to == Stage::initial))
    throw StageError(static_cast<Stage>(std::max(0, static_cast<int>(to) - 1)), s.stage);
  s.stage = to;
  for (auto& t : s.topics) t.stage = to;
  s.provenance[to_string(to)] = state_hash(s);
}

inline constexpr int kCheckpointVersion = 1;

inline void save_checkpoint(const std::filesystem::path& path, const TopicModelState& s, const std::string& input_hash = "") {
  json doc{{"format", "topicflow.checkpoint"}, {"version", kCheckpointVersion}, {"input_hash", input_hash}, {"state", to_json(s)}};
  write_file_atomic(path, doc.dump(1) + "\n");
}

struct Checkpoint {
  TopicModelState state;
  std::string input_hash;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError("unreadable checkpoint " + path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "topicflow.checkpoint") throw DataError("not a checkpoint: " + path.string());
  if (doc.value("version", 0) != kCheckpointVersion)
    throw DataError("checkpoint version " + std::to_string(doc.value("version", 0)) + " not supported");
  return {state_from_json(doc.at("state")), doc.value("input_hash", "")};
}

// ---------------------------------------------------------------------------
// Topic words and representatives

// Class-based TF-IDF: tf(w, c) * log(k / number of clusters containing w).
// Ties fall back to raw frequency, then to the word itself.
inline std::vector<std::vector<std::string>> class_tfidf_top_words(const std::vector<std::vector<std::string>>& cluster_texts,
                                                                   int n_words, TokenMode mode = TokenMode::words) {
  const std::size_t k = cluster_texts.size();
  std::vector<std::map<std::string, std::size_t>> tf(k);
  std::map<std::string, std::size_t> cdf;
  for (std::size_t c = 0; c < k; ++c) {
    for (const auto& text : cluster_texts[c])
      for (auto& tok : tokenize(text, mode)) ++tf[c][tok];
    for (const auto& [w, n] : tf[c]) ++cdf[w];
  }
  std::vector<std::vector<std::string>> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    struct Scored {
      double score;
      std::size_t tf;
      const std::string* word;
    };
    std::vector<Scored> scored;
    for (const auto& [w, n] : tf[c])
      scored.push_back({static_cast<double>(n) * std::log(static_cast<double>(k) / static_cast<double>(cdf[w])), n, &w});
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.tf != b.tf) return a.tf > b.tf;
      return *a.word < *b.word;
    });
    for (std::size_t i = 0; i < scored.size() && static_cast<int>(i) < n_words; ++i) out[c].push_back(*scored[i].word);
  }
  return out;
}

namespace detail {

inline std::vector<std::string> member_texts(const Topic& t, const SliceWorkspace& ws) {
  std::vector<std::string> out;
  for (const auto& id : t.members) out.push_back(ws.passage(id).text);
  return out;
}

// Recomputes top words for the topics flagged in `refresh`, scoring against
// the whole topic list.
inline void refresh_top_words(std::vector<Topic>& topics, const std::vector<char>& refresh, const SliceWorkspace& ws,
                              const PipelineConfig& cfg) {
  std::vector<std::vector<std::string>> texts;
  for (const auto& t : topics) texts.push_back(member_texts(t, ws));
  auto words = class_tfidf_top_words(texts, cfg.top_words, cfg.token_mode);
  for (std::size_t i = 0; i < topics.size(); ++i)
    if (refresh[i]) topics[i].top_words = words[i];
}

inline std::vector<std::string> representatives(const Topic& t, const SliceWorkspace& ws, double lambda, int count) {
  std::vector<std::string> ids(t.members.begin(), t.members.end());
  if (ids.empty()) return {};
  Matrix rows = ws.rows(ids);
  Vector centroid = rows.colwise().mean().transpose();
  auto picked = mmr_select(rows, centroid, lambda, std::min<int>(count, static_cast<int>(ids.size())));
  std::vector<std::string> out;
  for (int i : picked) out.push_back(ids[i]);
  return out;
}

inline TopicLabel name_from_representatives(const Topic& t, const SliceWorkspace& ws, PipelineContext& ctx) {
  std::vector<std::string> docs;
  for (const auto& id : t.representative_ids) docs.push_back(ws.passage(id).text);
  return name_topic(ctx.llm, t.top_words, docs, ctx.cfg.corpus_meta);
}

inline std::string passage_metadata(const LeaderPassage& p) {
  return "firm: " + p.firm_id + "; year: " + std::to_string(p.year) + "; leader: " + to_string(p.leader_type) +
         "; characteristic: " + to_string(p.characteristic);
}

inline std::vector<TopicDef> topic_defs(const std::vector<Topic>& topics) {
  std::vector<TopicDef> defs;
  for (const auto& t : topics) defs.push_back({t.topic_id, t.name, t.description});
  return defs;
}

inline void require_stage(const TopicModelState& s, Stage want) {
  if (s.stage != want) throw StageError(want, s.stage);
}

inline std::uint64_t topic_seed(std::uint64_t seed, const std::string& purpose, int topic_id) {
  return fnv1a64(purpose + ":" + std::to_string(topic_id), seed ^ 0x9e3779b97f4a7c15ULL);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage 1-2: density clustering and naming

inline TopicModelState build_initial_topics(SliceWorkspace& ws, PipelineContext& ctx) {
  const auto& cfg = ctx.cfg;
  auto labeling = density_cluster(ws.reduced(), cfg.min_cluster_size, cfg.min_samples);
  if (labeling.k == 0) throw InsufficientData("density clustering found no cluster in slice " + to_string(ws.key()));

  TopicModelState s;
  s.slice = to_string(ws.key());
  s.config = to_json(cfg);
  const auto& passages = ws.passages();
  s.topics.resize(labeling.k);
  for (int c = 0; c < labeling.k; ++c) s.topics[c].topic_id = c;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    if (labeling.labels[i] < 0)
      s.unassigned.insert(passages[i].passage_id);
    else
      s.topics[labeling.labels[i]].members.insert(passages[i].passage_id);
  }
  detail::refresh_top_words(s.topics, std::vector<char>(s.topics.size(), 1), ws, cfg);
  for (auto& t : s.topics) t.representative_ids = detail::representatives(t, ws, cfg.mmr_lambda, cfg.n_representatives);
  s.diagnostics["initial_outliers"] = labeling.outliers();
  advance(s, Stage::initial);

  auto labels = parallel_map(s.topics.size(), ctx.llm.options().max_in_flight,
                             [&](std::size_t i) { return detail::name_from_representatives(s.topics[i], ws, ctx); });
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s.topics[i].name = labels[i].name;
    s.topics[i].description = labels[i].description;
  }
  advance(s, Stage::named);
  return s;
}

inline TopicModelState build_initial_topics(const CorpusSlice& slice, PipelineContext& ctx) {
  SliceWorkspace ws(slice, ctx);
  return build_initial_topics(ws, ctx);
}

// ---------------------------------------------------------------------------
// Stage 3: soft reassignment

// passage id -> assigned topic ids (empty for none)
using AssignmentProgress = std::map<std::string, std::vector<int>>;

struct RefineHooks {
  const AssignmentProgress* resume = nullptr;
  std::function<void(const AssignmentProgress&)> checkpoint;  // after every batch
};

inline TopicModelState refine_assignments(const TopicModelState& in, SliceWorkspace& ws, PipelineContext& ctx,
                                          const RefineHooks& hooks = {}) {
  detail::require_stage(in, Stage::named);
  TopicModelState s = in;
  const auto defs = detail::topic_defs(s.topics);
  const auto& passages = ws.passages();
  AssignmentProgress progress = hooks.resume ? *hooks.resume : AssignmentProgress{};

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < passages.size(); ++i)
    if (!progress.count(passages[i].passage_id)) todo.push_back(i);
  const std::size_t batch = static_cast<std::size_t>(std::max(1, ctx.cfg.assign_batch));
  for (std::size_t b = 0; b < todo.size(); b += batch) {
    const std::size_t end = std::min(todo.size(), b + batch);
    auto results = parallel_map(end - b, ctx.llm.options().max_in_flight, [&](std::size_t j) {
      const auto& p = passages[todo[b + j]];
      std::vector<int> ids;
      for (const auto& a : assign_topics(ctx.llm, p.text, defs, detail::passage_metadata(p)))
        if (a.topic_id >= 0) ids.push_back(a.topic_id);
      std::sort(ids.begin(), ids.end());
      return ids;
    });
    for (std::size_t j = 0; j < results.size(); ++j) progress[passages[todo[b + j]].passage_id] = results[j];
    if (hooks.checkpoint) hooks.checkpoint(progress);
  }

  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < s.topics.size(); ++i) {
    s.topics[i].members.clear();
    slot[s.topics[i].topic_id] = i;
  }
  s.unassigned.clear();
  for (const auto& p : passages) {
    const auto& ids = progress.at(p.passage_id);
    if (ids.empty()) s.unassigned.insert(p.passage_id);
    for (int id : ids) s.topics[slot.at(id)].members.insert(p.passage_id);
  }
  json dropped = json::array();
  std::vector<Topic> kept;
  for (auto& t : s.topics) {
    if (t.members.empty()) {
      log::warn("topic " + std::to_string(t.topic_id) + " ('" + t.name + "') received no passages and is dropped");
      dropped.push_back(t.topic_id);
    } else {
      kept.push_back(std::move(t));
    }
  }
  s.topics = std::move(kept);
  s.diagnostics["dropped_after_reassignment"] = dropped;
  advance(s, Stage::reassigned);
  return s;
}

// ---------------------------------------------------------------------------
// Stage 4: polarity split

inline TopicModelState split_by_polarity(const TopicModelState& in, SliceWorkspace& ws, PipelineContext& ctx) {
  detail::require_stage(in, Stage::reassigned);
  const auto& cfg = ctx.cfg;
  TopicModelState s = in;

  struct Outcome {
    bool split = false;
    std::vector<ChildTopic> children;
    std::vector<int> route;  // per member (sorted order): child index or -1
    std::string error;
  };
  auto outcomes = parallel_map(s.topics.size(), ctx.llm.options().max_in_flight, [&](std::size_t i) {
    const Topic& t = s.topics[i];
    Outcome o;
    std::vector<std::string> ids(t.members.begin(), t.members.end());
    auto picks = sample_indices(ids.size(), static_cast<std::size_t>(cfg.split_sample),
                                detail::topic_seed(cfg.seed, "split", t.topic_id));
    std::vector<std::string> docs;
    for (auto p : picks) docs.push_back(ws.passage(ids[p]).text);
    PolaritySplit ps;
    try {
      ps = polarity_split(ctx.llm, t.label(), docs, cfg.corpus_meta);
    } catch (const InconsistentResponse& e) {
      log::warn("topic " + std::to_string(t.topic_id) + " left unsplit: " + e.what());
      o.error = e.what();
      return o;
    }
    if (!ps.contain_opposing_stance) return o;
    o.split = true;
    o.children = ps.children;
    std::vector<TopicDef> defs;
    for (std::size_t c = 0; c < ps.children.size(); ++c)
      defs.push_back({static_cast<int>(c), ps.children[c].name, ps.children[c].description});
    for (const auto& id : ids) {
      const auto& p = ws.passage(id);
      o.route.push_back(child_assign(ctx.llm, t.label(), p.text, defs, detail::passage_metadata(p)));
    }
    return o;
  });

  int next_id = 0;
  for (const auto& t : s.topics) next_id = std::max(next_id, t.topic_id + 1);
  std::vector<Topic> topics;
  std::vector<char> fresh;
  std::set<std::string> routed_out;
  json split_log = json::array(), errors = json::object();
  for (std::size_t i = 0; i < s.topics.size(); ++i) {
    const Topic& parent = s.topics[i];
    const Outcome& o = outcomes[i];
    if (!o.error.empty()) errors[std::to_string(parent.topic_id)] = o.error;
    if (!o.split) {
      topics.push_back(parent);
      fresh.push_back(0);
      continue;
    }
    std::vector<Topic> children(o.children.size());
    for (std::size_t c = 0; c < children.size(); ++c) {
      children[c].name = o.children[c].name;
      children[c].description = o.children[c].description;
      children[c].parent_id = parent.topic_id;
    }
    std::size_t m = 0;
    for (const auto& id : parent.members) {
      int r = o.route[m++];
      if (r < 0)
        routed_out.insert(id);
      else
        children[r].members.insert(id);
    }
    json made = json::array();
    for (auto& c : children) {
      if (c.members.empty()) {
        log::warn("child '" + c.name + "' of topic " + std::to_string(parent.topic_id) + " received no passages");
        continue;
      }
      c.topic_id = next_id++;
      made.push_back(c.topic_id);
      topics.push_back(std::move(c));
      fresh.push_back(1);
    }
    split_log.push_back({{"parent", parent.topic_id}, {"children", made}});
  }
  if (std::any_of(fresh.begin(), fresh.end(), [](char f) { return f; })) {
    detail::refresh_top_words(topics, fresh, ws, cfg);
    for (std::size_t i = 0; i < topics.size(); ++i)
      if (fresh[i]) topics[i].representative_ids = detail::representatives(topics[i], ws, cfg.mmr_lambda, cfg.n_representatives);
  }
  for (const auto& id : routed_out) {
    bool elsewhere = false;
    for (const auto& t : topics) elsewhere = elsewhere || t.members.count(id);
    if (!elsewhere) s.unassigned.insert(id);
  }
  s.topics = std::move(topics);
  s.diagnostics["splits"] = split_log;
  s.diagnostics["split_errors"] = errors;
  advance(s, Stage::split);
  return s;
}

// ---------------------------------------------------------------------------
// Stage 5: stance-aware integration

inline Vector topic_representation(const Vector& name_vec, const Vector& desc_vec, const Matrix& member_rows,
                                   const RepresentationWeights& w) {
  w.validate();
  if (member_rows.rows() == 0) throw DataError("topic has no members to represent");
  Vector docs = member_rows.colwise().mean().transpose();
  if (name_vec.size() != docs.size() || desc_vec.size() != docs.size())
    throw DimensionMismatch("name, description and document vectors differ in width");
  return w.name * name_vec + w.description * desc_vec + w.documents * docs;
}

inline Vector topic_representation(const Topic& t, const RepresentationWeights& w, SliceWorkspace& ws) {
  if (t.members.empty()) throw DataError("topic " + std::to_string(t.topic_id) + " has no members");
  return topic_representation(ws.reduce_text(t.name), ws.reduce_text(t.description),
                              ws.rows({t.members.begin(), t.members.end()}), w);
}

struct IntegrationDistance {
  Matrix d_meaning;
  Matrix s_stance;
  Matrix heaviside;
  Matrix d_overall;
  Eigen::MatrixXi judged;  // 1 where s_stance came from the judge
  double tau_meaning = 0.0;
};

inline double overall_distance(double d_meaning, double s_stance, double heaviside) {
  return d_meaning - (1.0 - s_stance) * heaviside;
}

// Linear-interpolated empirical quantile (the common "type 7" rule).
inline double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline std::vector<double> off_diagonal(const Matrix& m) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) v.push_back(m(i, j));
  return v;
}

// Applies d = d_meaning - (1 - s) * H with H = [d_meaning <= tau].
inline IntegrationDistance compose_integration_distance(const Matrix& d_meaning, const Matrix& s_stance, double tau) {
  const auto k = d_meaning.rows();
  if (d_meaning.cols() != k || s_stance.rows() != k || s_stance.cols() != k) throw DimensionMismatch("integration matrices");
  IntegrationDistance out;
  out.d_meaning = d_meaning;
  out.s_stance = s_stance;
  out.tau_meaning = tau;
  out.heaviside = Matrix::Zero(k, k);
  out.d_overall = Matrix::Zero(k, k);
  out.judged = Eigen::MatrixXi::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      out.heaviside(i, j) = d_meaning(i, j) <= tau ? 1.0 : 0.0;
      out.d_overall(i, j) = overall_distance(d_meaning(i, j), s_stance(i, j), out.heaviside(i, j));
    }
  return out;
}

inline Bindings stance_inputs(const Topic& a, const Topic& b) {
  return {{"topic_name_1", a.name},
          {"topic_short_description_1", a.description},
          {"topic_name_2", b.name},
          {"topic_short_description_2", b.description}};
}

// s_stance is the normalized stance-distinctness judgement (1 = clearly
// opposing), averaged over both presentation orders.  Only pairs inside the
// meaning threshold are judged; the rest carry s = 1 and judged = 0.
inline IntegrationDistance integration_distance(const std::vector<Topic>& topics, const std::vector<Vector>& reps,
                                                LlmClient& llm, double tau_quantile) {
  const auto k = static_cast<Eigen::Index>(topics.size());
  if (k < 2) throw DataError("integration needs at least two topics");
  if (static_cast<Eigen::Index>(reps.size()) != k) throw DimensionMismatch("one representation per topic expected");
  if (!(tau_quantile > 0.0 && tau_quantile < 1.0)) throw ConfigError("tau_quantile must be in (0, 1)");
  Matrix dm = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i + 1; j < k; ++j) dm(i, j) = dm(j, i) = cosine_distance(reps[i], reps[j]);
  const double tau = empirical_quantile(off_diagonal(dm), tau_quantile);

  std::vector<std::pair<Eigen::Index, Eigen::Index>> close;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i + 1; j < k; ++j)
      if (dm(i, j) <= tau) close.emplace_back(i, j);
  const auto& rubric = stance_similarity_rubric();
  auto scores = parallel_map(close.size(), llm.options().max_in_flight, [&](std::size_t c) {
    auto [i, j] = close[c];
    double a = judge(llm, rubric, stance_inputs(topics[i], topics[j])).normalized;
    double b = judge(llm, rubric, stance_inputs(topics[j], topics[i])).normalized;
    return 0.5 * (a + b);
  });
  Matrix s = Matrix::Ones(k, k);
  Eigen::MatrixXi judged = Eigen::MatrixXi::Zero(k, k);
  for (std::size_t c = 0; c < close.size(); ++c) {
    auto [i, j] = close[c];
    s(i, j) = s(j, i) = scores[c];
    judged(i, j) = judged(j, i) = 1;
  }
  auto out = compose_integration_distance(dm, s, tau);
  out.judged = judged;
  return out;
}

inline json to_json(const IntegrationDistance& d) {
  auto mat = [](const auto& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  return {{"tau_meaning", d.tau_meaning}, {"d_meaning", mat(d.d_meaning)}, {"s_stance", mat(d.s_stance)},
          {"heaviside", mat(d.heaviside)}, {"judged", mat(d.judged)},       {"d_overall", mat(d.d_overall)}};
}

struct IntegrationTrace {
  IntegrationDistance distance;
  double shift = 0.0;
  Matrix shifted;
  Linkage linkage;
  std::vector<int> groups;  // per input topic
};

namespace detail {

// Topics sharing a group become one topic (id = smallest member id) with a
// fresh name; singleton groups pass through unchanged.
inline std::vector<Topic> merge_topic_groups(const TopicModelState& in, const std::vector<int>& groups, int n_clusters,
                                             SliceWorkspace& ws, PipelineContext& ctx) {
  const auto& cfg = ctx.cfg;
  const int k = static_cast<int>(in.topics.size());
  std::vector<Topic> merged(n_clusters);
  std::vector<std::vector<int>> group_members(n_clusters);
  for (int i = 0; i < k; ++i) group_members[groups[i]].push_back(i);
  std::vector<char> renamed(n_clusters, 0);
  for (int g = 0; g < n_clusters; ++g) {
    const auto& idx = group_members[g];
    if (idx.size() == 1) {
      merged[g] = in.topics[idx[0]];
      continue;
    }
    Topic t;
    t.topic_id = in.topics[idx[0]].topic_id;
    for (int i : idx) {
      t.topic_id = std::min(t.topic_id, in.topics[i].topic_id);
      t.merged_from.push_back(in.topics[i].topic_id);
      t.members.insert(in.topics[i].members.begin(), in.topics[i].members.end());
    }
    merged[g] = std::move(t);
    renamed[g] = 1;
  }
  if (std::any_of(renamed.begin(), renamed.end(), [](char r) { return r; })) {
    detail::refresh_top_words(merged, renamed, ws, cfg);
    for (int g = 0; g < n_clusters; ++g)
      if (renamed[g]) merged[g].representative_ids = detail::representatives(merged[g], ws, cfg.rename_mmr_lambda, cfg.n_representatives);
    std::vector<int> todo;
    for (int g = 0; g < n_clusters; ++g)
      if (renamed[g]) todo.push_back(g);
    auto labels = parallel_map(todo.size(), ctx.llm.options().max_in_flight,
                               [&](std::size_t i) { return detail::name_from_representatives(merged[todo[i]], ws, ctx); });
    for (std::size_t i = 0; i < todo.size(); ++i) {
      merged[todo[i]].name = labels[i].name;
      merged[todo[i]].description = labels[i].description;
    }
  }
  return merged;
}

}  // namespace detail

inline TopicModelState integrate_topics(const TopicModelState& in, int n_clusters, SliceWorkspace& ws, PipelineContext& ctx,
                                        IntegrationTrace* trace = nullptr) {
  detail::require_stage(in, Stage::split);
  const auto& cfg = ctx.cfg;
  const int k = static_cast<int>(in.topics.size());
  if (n_clusters < 1 || n_clusters > k)
    throw ConfigError("n_clusters must be in [1, " + std::to_string(k) + "], got " + std::to_string(n_clusters));
  TopicModelState s = in;
  std::vector<int> groups(k);
  std::iota(groups.begin(), groups.end(), 0);
  if (k >= 2) {
    std::vector<Vector> reps;
    for (const auto& t : in.topics) reps.push_back(topic_representation(t, cfg.weights, ws));
    auto dist = integration_distance(in.topics, reps, ctx.llm, cfg.tau_quantile);
    double lowest = 0.0;
    for (double v : off_diagonal(dist.d_overall)) lowest = std::min(lowest, v);
    Matrix shifted = dist.d_overall;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        if (i != j) shifted(i, j) -= lowest;
    Linkage linkage = ward_linkage(shifted);
    groups = cut_linkage(linkage, k, n_clusters);
    s.diagnostics["integration"] = {{"n_clusters", n_clusters}, {"shift", -lowest}, {"distance", to_json(dist)}};
    if (trace) *trace = {std::move(dist), -lowest, std::move(shifted), std::move(linkage), groups};
  } else if (trace) {
    trace->groups = groups;
  }

  s.topics = detail::merge_topic_groups(in, groups, n_clusters, ws, ctx);
  advance(s, Stage::integrated);
  return s;
}

// Baseline reduction for the named or reassigned states: Ward on the
// semantic distance alone, keeping the input stage.
inline TopicModelState reduce_topics(const TopicModelState& in, int n_clusters, SliceWorkspace& ws, PipelineContext& ctx) {
  if (in.stage != Stage::named && in.stage != Stage::reassigned) throw StageError(Stage::reassigned, in.stage);
  const int k = static_cast<int>(in.topics.size());
  if (n_clusters < 1 || n_clusters > k)
    throw ConfigError("n_clusters must be in [1, " + std::to_string(k) + "], got " + std::to_string(n_clusters));
  TopicModelState s = in;
  std::vector<int> groups(k);
  std::iota(groups.begin(), groups.end(), 0);
  if (n_clusters < k) {
    std::vector<Vector> reps;
    for (const auto& t : in.topics) reps.push_back(topic_representation(t, ctx.cfg.weights, ws));
    Matrix dm = Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) dm(i, j) = dm(j, i) = cosine_distance(reps[i], reps[j]);
    groups = cut_linkage(ward_linkage(dm), k, n_clusters);
    s.topics = detail::merge_topic_groups(in, groups, n_clusters, ws, ctx);
    for (auto& t : s.topics) t.stage = in.stage;
  }
  s.diagnostics["reduction"] = {{"n_clusters", n_clusters}, {"from", k}};
  s.provenance["reduced_" + std::to_string(n_clusters)] = state_hash(s);
  return s;
}

// ---------------------------------------------------------------------------

struct TopicCountGrid {
  int tmin, tmid, tmax;
  std::array<int, 3> values() const { return {tmin, tmid, tmax}; }
};

// Five equal bins over [1, k]; Tmin and Tmid are the upper edges of bins one
// and three (rounded down), Tmax is k.
inline TopicCountGrid topic_count_grid(int k_original) {
  if (k_original < 5) throw DataError("too few topics for the count grid: " + std::to_string(k_original) + " < 5");
  return {k_original / 5, 3 * k_original / 5, k_original};
}

// ---------------------------------------------------------------------------
// Resumable per-slice run

struct SliceRunResult {
  TopicModelState named, reassigned, split;
  std::map<int, TopicModelState> integrated;  // by n_clusters
};

namespace detail {

template <typename Fn>
TopicModelState cached_stage(const std::filesystem::path& path, const std::string& input_hash, Fn&& compute) {
  if (std::filesystem::exists(path)) {
    auto cp = load_checkpoint(path);
    if (cp.input_hash == input_hash) return cp.state;
    log::info("checkpoint " + path.filename().string() + " is stale; recomputing");
  }
  TopicModelState s = compute();
  save_checkpoint(path, s, input_hash);
  return s;
}

}  // namespace detail

// Runs all stages for one slice under `dir`, reusing checkpoints whose input
// hash still matches.  Reassignment progress is saved after every batch.
inline SliceRunResult run_slice(const CorpusSlice& slice, PipelineContext& ctx, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SliceWorkspace ws(slice, ctx);
  json inputs = json::array();
  for (const auto& p : slice.passages) inputs.push_back(to_json(p));
  const std::string cfg_hash = content_hash(to_json(ctx.cfg));
  const std::string base_hash = content_hash(json{{"passages", inputs}, {"config", cfg_hash}, {"llm", ctx.llm.model_id()},
                                                  {"embedder", ctx.embedder.provider_id()}});

  SliceRunResult r;
  r.named = detail::cached_stage(dir / "named.json", base_hash, [&] { return build_initial_topics(ws, ctx); });
  const auto progress_path = dir / "reassign.progress.json";
  r.reassigned = detail::cached_stage(dir / "reassigned.json", state_hash(r.named), [&] {
    AssignmentProgress resume;
    const std::string key = state_hash(r.named);
    if (std::filesystem::exists(progress_path)) {
      auto doc = json::parse(read_file(progress_path));
      if (doc.value("input_hash", "") == key) resume = doc.at("progress").get<AssignmentProgress>();
    }
    RefineHooks hooks;
    hooks.resume = &resume;
    hooks.checkpoint = [&](const AssignmentProgress& p) {
      write_file_atomic(progress_path, json{{"input_hash", key}, {"progress", p}}.dump() + "\n");
    };
    return refine_assignments(r.named, ws, ctx, hooks);
  });
  std::filesystem::remove(progress_path);
  r.split = detail::cached_stage(dir / "split.json", state_hash(r.reassigned),
                                 [&] { return split_by_polarity(r.reassigned, ws, ctx); });

  std::vector<int> counts = ctx.cfg.n_clusters;
  const int k = static_cast<int>(r.split.topics.size());
  if (counts.empty()) {
    if (k >= 5) {
      auto g = topic_count_grid(k).values();
      counts.assign(g.begin(), g.end());
    } else {
      log::warn("slice " + r.split.slice + " has " + std::to_string(k) + " topics; integrating at k only");
      counts = {k};
    }
  }
  for (int n : counts) {
    if (r.integrated.count(n)) continue;
    if (n > k) {
      log::warn("slice " + r.split.slice + " has " + std::to_string(k) + " topics; skipping n_clusters " + std::to_string(n));
      continue;
    }
    r.integrated[n] = detail::cached_stage(dir / ("integrated_" + std::to_string(n) + ".json"), state_hash(r.split),
                                           [&] { return integrate_topics(r.split, n, ws, ctx); });
  }
  return r;
}

}  // namespace topicflow
