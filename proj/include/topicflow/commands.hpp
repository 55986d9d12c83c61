#pragma once

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <fcntl.h>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "topicflow/common.hpp"
#include "topicflow/config.hpp"
#include "topicflow/corpus.hpp"
#include "topicflow/embedding.hpp"
#include "topicflow/http_provider.hpp"
#include "topicflow/llm.hpp"
#include "topicflow/log.hpp"
#include "topicflow/metrics.hpp"
#include "topicflow/mock_llm.hpp"
#include "topicflow/outcomes.hpp"
#include "topicflow/pipeline.hpp"

namespace topicflow::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kProviderError = 3, kDataError = 4 };

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
  if (dynamic_cast<const ProviderError*>(&e)) return kProviderError;
  if (dynamic_cast<const DataError*>(&e)) return kDataError;
  return kFailure;
}

// One command per run directory: an exclusive lock file holding the pid.
// A lock left by a process that no longer exists is taken over.
class RunLock {
 public:
  explicit RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
    fs::create_directories(run_dir);
    for (int attempt = 0; attempt < 2; ++attempt) {
      int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
      if (fd >= 0) {
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        return;
      }
      std::string holder;
      try {
        holder = trim(read_file(path_));
      } catch (const std::exception&) {
      }
      const long pid = std::atol(holder.c_str());
      if (pid > 0 && (::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM))
        throw ConfigError("run directory " + run_dir.string() + " is in use by process " + holder);
      log::warn("removing stale lock " + path_.string());
      std::error_code ec;
      fs::remove(path_, ec);
    }
    throw ConfigError("cannot lock run directory " + run_dir.string());
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

// The configuration a run directory was created with is frozen in its
// manifest; later commands must use the same configuration.
inline void check_manifest(const RunConfig& cfg, const json& provenance = json::object()) {
  const auto path = cfg.run_dir / "manifest.json";
  const json snapshot = to_json(cfg);
  if (fs::exists(path)) {
    json stored;
    try {
      stored = json::parse(read_file(path)).at("config");
    } catch (const json::exception&) {
      throw DataError("unreadable run manifest " + path.string());
    }
    if (stored != snapshot) {
      std::string diff;
      for (const auto& [key, value] : snapshot.items())
        if (!stored.contains(key) || stored[key] != value) diff += (diff.empty() ? "" : ", ") + key;
      throw ConfigError("configuration differs from the one recorded in " + path.string() + " (" + diff +
                        "); use a new run_dir");
    }
    return;
  }
  json manifest{{"format", "topicflow.run"}, {"version", 1}, {"config", snapshot}};
  for (const auto& [key, value] : provenance.items()) manifest[key] = value;
  write_file_atomic(path, manifest.dump(2) + "\n");
}

struct Providers {
  std::shared_ptr<LlmProvider> llm;
  std::unique_ptr<EmbeddingProvider> embedder;
  bool mock = true;
};

inline bool credentials_present(const RunConfig& c) {
  const char* v = std::getenv(c.provider.llm.api_key_env.c_str());
  return v && *v;
}

inline Providers make_providers(const RunConfig& c) {
  Providers p;
  const bool http = c.provider.mode == ProviderMode::http ||
                    (c.provider.mode == ProviderMode::auto_detect && credentials_present(c));
  if (!http) {
    if (c.provider.mode == ProviderMode::auto_detect) log::info("no credentials found; using offline mock providers");
    p.llm = std::make_shared<HeuristicLlmProvider>();
    p.embedder = std::make_unique<MockEmbeddingProvider>(c.provider.mock_embedding_dim, c.pipeline.token_mode);
    return p;
  }
  const auto& l = c.provider.llm;
  const auto& e = c.provider.embedding;
  p.llm = std::make_shared<HttpLlmProvider>(make_http_target(l.base_url, l.model, credential_from_env(l.api_key_env), l.timeout_s));
  p.embedder = std::make_unique<RetryingEmbeddingProvider>(
      std::make_unique<HttpEmbeddingProvider>(make_http_target(e.base_url, e.model, credential_from_env(e.api_key_env), e.timeout_s)),
      c.provider.max_retries);
  p.mock = false;
  return p;
}

inline ClientOptions client_options(const RunConfig& c) {
  ClientOptions o;
  o.cache_dir = c.effective_cache_dir() / "llm";
  o.max_retries = c.provider.max_retries;
  o.max_in_flight = static_cast<std::size_t>(c.provider.max_in_flight);
  o.language = c.provider.language;
  return o;
}

// Providers, clients and caches shared by the commands of one invocation.
class Session {
 public:
  Session(RunConfig cfg, Providers providers)
      : cfg_(std::move(cfg)),
        providers_(std::move(providers)),
        llm_(providers_.llm, client_options(cfg_)),
        embedding_cache_(cfg_.effective_cache_dir() / "embeddings", providers_.embedder->provider_id()) {}

  explicit Session(RunConfig cfg) : Session(cfg, make_providers(cfg)) {}

  const RunConfig& config() const { return cfg_; }
  LlmClient& llm() { return llm_; }
  EmbeddingProvider& embedder() { return *providers_.embedder; }
  PipelineContext context() { return PipelineContext{llm_, *providers_.embedder, &embedding_cache_, cfg_.pipeline}; }
  bool mock() const { return providers_.mock; }

  fs::path passages_path() const { return cfg_.run_dir / "passages.jsonl"; }
  fs::path models_dir() const { return cfg_.run_dir / "models"; }
  fs::path reports_dir() const { return cfg_.run_dir / "reports"; }

 private:
  RunConfig cfg_;
  Providers providers_;
  LlmClient llm_;
  EmbeddingCache embedding_cache_;
};

// Provider ids and prompt hashes recorded next to the frozen configuration.
inline json run_provenance(Session& s) {
  const auto lang = s.config().provider.language;
  json templates = json::object();
  for (auto id : {TemplateId::extract, TemplateId::name_topic, TemplateId::assign_topics, TemplateId::polarity_split,
                  TemplateId::child_assign})
    templates[to_string(id)] = content_hash(prompt_template(id, lang).body);
  for (auto id : {RubricId::stance_similarity, RubricId::label_alignment, RubricId::specificity, RubricId::stance_consistency,
                  RubricId::semantic_similarity}) {
    const auto& r = rubric(id);
    Bindings placeholders;
    for (const auto& name : r.input_names) placeholders[name] = "{{" + name + "}}";
    templates["judge:" + to_string(id)] = content_hash(render_judge_prompt(r, placeholders, lang));
  }
  return {{"seed", s.config().seed},
          {"providers", {{"llm", s.llm().model_id()}, {"embedding", s.embedder().provider_id()}, {"mock", s.mock()}}},
          {"prompt_templates", templates}};
}

namespace detail {

inline json stats_json(const LlmClient& llm) {
  auto s = llm.stats();
  return {{"provider_calls", s.provider_calls}, {"cache_hits", s.cache_hits}, {"cache_misses", s.cache_misses}};
}

inline std::vector<LeaderPassage> require_passages(Session& s) {
  if (!fs::exists(s.passages_path())) throw DataError("no passage store at " + s.passages_path().string() + "; run extract first");
  return load_passages(s.passages_path());
}

inline std::vector<SliceKey> selected_slices(const RunConfig& c, const std::optional<std::string>& only) {
  std::vector<SliceKey> keys;
  if (only) return {parse_slice_key(*only)};
  if (!c.slices.empty()) {
    for (const auto& s : c.slices) keys.push_back(parse_slice_key(s));
    return keys;
  }
  auto all = analysis_slices();
  return {all.begin(), all.end()};
}

// Slices with a completed model, from the model index.
inline std::vector<std::string> modeled_slices(Session& s) {
  const auto index = s.models_dir() / "index.json";
  if (!fs::exists(index)) throw DataError("no topic models in " + s.models_dir().string() + "; run model first");
  const json doc = json::parse(read_file(index));
  std::vector<std::string> out;
  for (const auto& [slice, info] : doc.items())
    if (info.value("status", "") == "ok") out.push_back(slice);
  if (out.empty()) throw DataError("no slice produced a topic model");
  return out;
}

inline std::vector<int> integrated_counts(const json& info) { return info.at("integrated").get<std::vector<int>>(); }

inline std::vector<std::string> granularity_labels(const std::vector<int>& counts) {
  if (counts.size() == 3) return {"Tmin", "Tmid", "Tmax"};
  std::vector<std::string> out;
  for (int n : counts) out.push_back("T" + std::to_string(n));
  return out;
}

inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"named", "reassigned", "split_integrated"};
  return names;
}

// The topic model of `model` at granularity `n`, or nothing when the
// baseline has fewer than n topics.  Baseline reductions are checkpointed.
inline std::optional<TopicModelState> model_at(const std::string& model, int n, const fs::path& dir, SliceWorkspace& ws,
                                               PipelineContext& ctx) {
  if (model == "split_integrated") return load_checkpoint(dir / ("integrated_" + std::to_string(n) + ".json")).state;
  const auto base = load_checkpoint(dir / (model + ".json")).state;
  const int k = static_cast<int>(base.topics.size());
  if (n > k) return std::nullopt;
  if (n == k) return base;
  return ::topicflow::detail::cached_stage(dir / ("baseline_" + model + "_" + std::to_string(n) + ".json"), state_hash(base),
                                [&] { return reduce_topics(base, n, ws, ctx); });
}

}  // namespace detail

inline CorpusSlice slice_of(const std::vector<LeaderPassage>& passages, const SliceKey& key) {
  return slice_corpus(passages).slices.at(key);
}

inline std::vector<EvalTopic> eval_topics(const TopicModelState& state, SliceWorkspace& ws) {
  std::vector<EvalTopic> out;
  for (const auto& t : state.topics) {
    EvalTopic e{std::to_string(t.topic_id), t.name, t.description, t.top_words, {}};
    for (const auto& id : t.members) e.member_texts.push_back(ws.passage(id).text);
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

inline json cmd_extract(Session& s) {
  const auto& c = s.config();
  if (c.corpus.empty()) throw ConfigError("config key 'corpus' is required for extract");
  if (!fs::exists(c.corpus)) throw ConfigError("corpus file not found: " + c.corpus.string());
  auto docs = load_corpus(c.corpus, corpus_format_for(c.corpus));
  auto passages = extract_all(docs, s.llm());
  save_passages(s.passages_path(), passages);
  auto sliced = slice_corpus(passages);
  json slices = json::object();
  for (const auto& [key, slice] : sliced.slices) slices[to_string(key)] = slice.passages.size();
  json summary{{"documents", docs.size()},
               {"passages", passages.size()},
               {"excluded", sliced.excluded},
               {"slices", slices}};
  write_file_atomic(c.run_dir / "extract.json", summary.dump(2) + "\n");
  summary["llm"] = detail::stats_json(s.llm());
  return summary;
}

inline json cmd_model(Session& s, const std::optional<std::string>& only_slice = std::nullopt) {
  auto passages = detail::require_passages(s);
  auto sliced = slice_corpus(passages);
  const auto index_path = s.models_dir() / "index.json";
  json index = fs::exists(index_path) ? json::parse(read_file(index_path)) : json::object();
  auto ctx = s.context();
  for (const auto& key : detail::selected_slices(s.config(), only_slice)) {
    const auto name = to_string(key);
    const auto& slice = sliced.slices.at(key);
    try {
      auto r = run_slice(slice, ctx, s.models_dir() / name);
      json integrated = json::array();
      for (const auto& [n, st] : r.integrated) integrated.push_back(n);
      index[name] = {{"status", "ok"},
                     {"passages", slice.passages.size()},
                     {"topics",
                      {{"named", r.named.topics.size()}, {"reassigned", r.reassigned.topics.size()}, {"split", r.split.topics.size()}}},
                     {"integrated", integrated},
                     {"final_hash", r.integrated.empty() ? "" : state_hash(r.integrated.rbegin()->second)}};
    } catch (const InsufficientData& e) {
      if (only_slice) throw;
      log::warn("slice " + name + " skipped: " + e.what());
      index[name] = {{"status", "skipped"}, {"passages", slice.passages.size()}, {"reason", e.what()}};
    }
    write_file_atomic(index_path, index.dump(2) + "\n");
  }
  return {{"models", index}, {"llm", detail::stats_json(s.llm())}};
}

inline json cmd_evaluate(Session& s) {
  auto passages = detail::require_passages(s);
  const auto index = json::parse(read_file(s.models_dir() / "index.json"));
  auto ctx = s.context();
  std::vector<std::string> granularities;
  std::map<std::string, std::vector<int>> counts;
  for (const auto& name : detail::modeled_slices(s)) {
    counts[name] = detail::integrated_counts(index.at(name));
    auto labels = detail::granularity_labels(counts[name]);
    for (const auto& l : labels)
      if (std::find(granularities.begin(), granularities.end(), l) == granularities.end()) granularities.push_back(l);
  }
  MetricTable table(metric_ids(), detail::model_names(), granularities);
  json summary = json::object();
  for (const auto& [name, ns] : counts) {
    const auto dir = s.models_dir() / name;
    auto slice = slice_of(passages, parse_slice_key(name));
    SliceWorkspace ws(slice, ctx);
    std::vector<std::string> texts;
    for (const auto& p : slice.passages) texts.push_back(p.text);
    const auto labels = detail::granularity_labels(ns);
    for (const auto& model : detail::model_names())
      for (std::size_t g = 0; g < ns.size(); ++g) {
        auto state = detail::model_at(model, ns[g], dir, ws, ctx);
        if (!state) continue;
        auto reports = evaluate_topics(s.llm(), eval_topics(*state, ws), texts, s.config().metrics);
        json out = json::array();
        for (const auto& r : reports) {
          out.push_back(to_json(r));
          table.set(name, model, r.metric_id, labels[g], r.aggregate);
        }
        const auto file = s.config().run_dir / "eval" / name / (model + "_" + std::to_string(ns[g]) + ".json");
        fs::create_directories(file.parent_path());
        write_file_atomic(file, out.dump(1) + "\n");
        summary[name][model][labels[g]] = ns[g];
      }
  }
  fs::create_directories(s.reports_dir());
  write_file_atomic(s.reports_dir() / "metrics.csv", table.csv(4));
  write_file_atomic(s.reports_dir() / "metrics.md", table.markdown(3));
  return {{"evaluated", summary}, {"llm", detail::stats_json(s.llm())}};
}

inline std::map<int, std::set<std::string>> topic_members(const TopicModelState& state) {
  std::map<int, std::set<std::string>> out;
  for (const auto& t : state.topics) out[t.topic_id] = t.members;
  return out;
}

inline json cmd_outcomes(Session& s) {
  const auto& c = s.config();
  if (c.panel.empty()) throw ConfigError("config key 'panel' is required for outcomes");
  auto panel = load_panel(c.panel);
  auto passages = detail::require_passages(s);
  const auto index = json::parse(read_file(s.models_dir() / "index.json"));

  std::optional<std::map<FirmYear, int>> totals;
  if (c.outcomes.global_denominator) {
    if (c.corpus.empty() || !fs::exists(c.corpus)) throw ConfigError("the global denominator needs the corpus file");
    totals.emplace();
    for (const auto& d : load_corpus(c.corpus, corpus_format_for(c.corpus))) ++(*totals)[{d.firm_id, d.year}];
  }
  const auto* denominators = totals ? &*totals : nullptr;

  auto ctx = s.context();
  ElasticNetOptions en;
  en.cv_folds = c.outcomes.cv_folds;
  en.l1_ratios = c.outcomes.l1_ratios;
  en.seed = c.seed;
  RegressionOptions ro;
  ro.thresholds = c.outcomes.thresholds;
  ro.se_type = c.outcomes.standard_errors;
  RobustnessRule rule;
  rule.alpha = c.outcomes.significance;
  rule.min_thresholds = c.outcomes.min_significant_thresholds;
  rule.min_posts = c.outcomes.min_posts;

  std::vector<std::string> granularities;
  for (const auto& name : detail::modeled_slices(s))
    for (const auto& l : detail::granularity_labels(detail::integrated_counts(index.at(name))))
      if (std::find(granularities.begin(), granularities.end(), l) == granularities.end()) granularities.push_back(l);
  MetricTable power({"ROA", "Employees Morale"}, detail::model_names(), granularities);

  std::vector<RegressionResult> all_results, robust_results;
  std::vector<int> robust_order;
  std::map<int, TopicInfo> info;
  json regressions = json::object(), robust = json::object();
  for (const auto& name : detail::modeled_slices(s)) {
    const auto key = parse_slice_key(name);
    const auto dir = s.models_dir() / name;
    auto slice = slice_of(passages, key);
    SliceWorkspace ws(slice, ctx);
    const auto ns = detail::integrated_counts(index.at(name));
    const auto labels = detail::granularity_labels(ns);
    for (const auto& model : detail::model_names())
      for (std::size_t g = 0; g < ns.size(); ++g) {
        auto state = detail::model_at(model, ns[g], dir, ws, ctx);
        if (!state) continue;
        auto design = build_design(aggregate_frequencies(topic_members(*state), slice.passages, c.outcomes.explanatory_threshold,
                                                         denominators),
                                   panel);
        if (static_cast<int>(design.rows.size()) <= c.outcomes.cv_folds) {
          log::warn(name + "/" + model + ": only " + std::to_string(design.rows.size()) +
                    " firm-years pass the threshold; explanatory power skipped");
          continue;
        }
        Matrix controls = design.log_employees;
        power.set(name, model, "ROA", labels[g], explanatory_power(design.f, controls, design.y.at(OutcomeKind::roa), en).partial_r2);
        power.set(name, model, "Employees Morale", labels[g],
                  explanatory_power(design.f, controls, design.y.at(OutcomeKind::morale), en).partial_r2);
      }

    // per-topic regressions use the split topics before integration
    const auto split = load_checkpoint(dir / "split.json").state;
    auto results = run_topic_regressions(topic_members(split), slice.passages, panel, ro, denominators);
    auto kept = robustness_filter(results, rule);
    json arr = json::array();
    for (const auto& r : results) arr.push_back(to_json(r));
    regressions[name] = arr;
    robust[name] = kept;
    // topic ids are only unique within a slice; offset them for the shared table
    const auto order = analysis_slices();
    const int offset = static_cast<int>(std::find(order.begin(), order.end(), key) - order.begin()) * 100000;
    for (const auto& t : split.topics)
      info[offset + t.topic_id] = {to_string(key.leader_type), to_string(key.characteristic), t.name, t.description, t.topic_id};
    for (auto r : results) {
      r.topic_id += offset;
      all_results.push_back(r);
      if (std::find(kept.begin(), kept.end(), r.topic_id - offset) != kept.end()) robust_results.push_back(r);
    }
    for (int id : kept) robust_order.push_back(offset + id);
  }
  std::vector<int> all_order;
  for (const auto& [id, ti] : info) all_order.push_back(id);

  fs::create_directories(s.reports_dir());
  write_file_atomic(s.reports_dir() / "explanatory_power.csv", power.csv(4));
  write_file_atomic(s.reports_dir() / "explanatory_power.md", power.markdown(3));
  write_file_atomic(s.reports_dir() / "topic_outcomes.csv",
                    topic_outcome_csv(robust_results, info, c.outcomes.thresholds, robust_order, rule.alpha));
  write_file_atomic(s.reports_dir() / "topic_outcomes_all.csv",
                    topic_outcome_csv(all_results, info, c.outcomes.thresholds, all_order, rule.alpha));
  write_file_atomic(s.reports_dir() / "regressions.json", json{{"results", regressions}, {"robust", robust}}.dump(1) + "\n");
  return {{"robust_topics", robust}, {"llm", detail::stats_json(s.llm())}};
}

inline json cmd_report(Session& s) {
  const auto& c = s.config();
  const auto index = json::parse(read_file(s.models_dir() / "index.json"));
  std::ostringstream md;
  md << "# Topic model report\n\n";
  md << "- seed: " << c.seed << "\n- llm: " << s.llm().model_id() << "\n- embeddings: " << s.embedder().provider_id()
     << "\n- configuration hash: " << content_hash(to_json(c)) << "\n\n";
  for (const auto& [name, info] : index.items()) {
    md << "## " << name << "\n\n";
    if (info.value("status", "") != "ok") {
      md << "Skipped: " << info.value("reason", "") << "\n\n";
      continue;
    }
    const auto dir = s.models_dir() / name;
    auto listing = [&](const std::string& title, const TopicModelState& st) {
      md << "### " << title << " (" << st.topics.size() << " topics, " << st.unassigned.size() << " unassigned)\n\n";
      md << "| id | name | description | size |\n| --- | --- | --- | --- |\n";
      for (const auto& t : st.topics) md << "| " << t.topic_id << " | " << t.name << " | " << t.description << " | " << t.members.size() << " |\n";
      md << "\n";
    };
    listing("split", load_checkpoint(dir / "split.json").state);
    for (int n : detail::integrated_counts(info))
      listing("integrated at " + std::to_string(n), load_checkpoint(dir / ("integrated_" + std::to_string(n) + ".json")).state);
  }
  auto section = [&](const std::string& title, const std::string& file) {
    const auto path = s.reports_dir() / file;
    if (!fs::exists(path)) return;
    md << "## " << title << "\n\n" << read_file(path) << "\n";
  };
  section("Topic quality", "metrics.md");
  section("Explanatory power (partial R^2)", "explanatory_power.md");
  if (fs::exists(s.reports_dir() / "topic_outcomes.csv"))
    md << "## Robust topic-outcome associations\n\n```\n" << read_file(s.reports_dir() / "topic_outcomes.csv") << "```\n";
  fs::create_directories(s.reports_dir());
  write_file_atomic(s.reports_dir() / "report.md", md.str());
  return {{"report", (s.reports_dir() / "report.md").string()}};
}

}  // namespace topicflow::cli
