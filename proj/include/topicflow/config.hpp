#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "topicflow/common.hpp"
#include "topicflow/corpus.hpp"
#include "topicflow/metrics.hpp"
#include "topicflow/outcomes.hpp"
#include "topicflow/pipeline.hpp"

namespace topicflow {

enum class ProviderMode { auto_detect, mock, http };

struct HttpEndpoint {
  std::string base_url = "https://api.openai.com/v1";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_s = 120;
};

struct ProviderConfig {
  ProviderMode mode = ProviderMode::auto_detect;
  HttpEndpoint llm{"https://api.openai.com/v1", "gpt-4o-2024-08-06", "OPENAI_API_KEY", 120};
  HttpEndpoint embedding{"https://api.openai.com/v1", "text-embedding-3-large", "OPENAI_API_KEY", 120};
  int mock_embedding_dim = 64;
  int max_retries = 5;
  int max_in_flight = 4;
  prompts::Language language = prompts::Language::en;
};

struct OutcomeConfig {
  std::vector<int> thresholds{5, 10, 15};
  int explanatory_threshold = 10;
  int cv_folds = 5;
  std::vector<double> l1_ratios{0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0};
  std::size_t min_posts = 100;
  double significance = 0.05;
  int min_significant_thresholds = 2;
  StandardErrors standard_errors = StandardErrors::conventional;
  bool global_denominator = false;
};

struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path panel;
  std::filesystem::path run_dir = "run";
  std::filesystem::path cache_dir;  // empty: <run_dir>/cache
  std::uint64_t seed = 0;
  std::vector<std::string> slices;  // empty: all six
  ProviderConfig provider;
  PipelineConfig pipeline;
  EvaluationSettings metrics;
  OutcomeConfig outcomes;

  std::filesystem::path effective_cache_dir() const { return cache_dir.empty() ? run_dir / "cache" : cache_dir; }
};

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"", {"corpus", "panel", "run_dir", "cache_dir", "seed", "slices", "provider", "pipeline", "metrics", "outcomes"}},
      {"provider", {"mode", "llm", "embedding", "mock_embedding_dim", "max_retries", "max_in_flight", "language"}},
      {"provider.llm", {"base_url", "model", "api_key_env", "timeout_s"}},
      {"provider.embedding", {"base_url", "model", "api_key_env", "timeout_s"}},
      {"pipeline",
       {"min_cluster_size", "min_samples", "variance_target", "max_dim", "pca_chunk", "embed_batch", "top_words",
        "n_representatives", "mmr_lambda", "rename_mmr_lambda", "split_sample", "tau_quantile", "weights", "n_clusters",
        "assign_batch", "token_mode", "corpus_meta"}},
      {"metrics", {"alignment_sample", "semantic_edge_threshold", "token_mode"}},
      {"outcomes",
       {"thresholds", "explanatory_threshold", "cv_folds", "l1_ratios", "min_posts", "significance",
        "min_significant_thresholds", "standard_errors", "denominator"}}};
  return s;
}

inline void check_keys(const YAML::Node& node, const std::string& path) {
  if (!node.IsMap()) throw ConfigError("config section '" + (path.empty() ? std::string("<root>") : path) + "' must be a mapping");
  const auto& schema = config_schema().at(path);
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    const std::string full = path.empty() ? key : path + "." + key;
    if (!schema.count(key)) throw ConfigError("unknown config key '" + full + "'");
    if (config_schema().count(full) && !kv.second.IsNull()) check_keys(kv.second, full);
  }
}

template <class T>
void read(const YAML::Node& n, const char* key, T& out, const std::string& path) {
  if (!n || !n[key] || n[key].IsNull()) return;
  try {
    out = n[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config key '" + (path.empty() ? std::string(key) : path + "." + key) + "' has the wrong type");
  }
}

inline TokenMode parse_token_mode(const std::string& s) {
  if (s == "words") return TokenMode::words;
  if (s == "char_bigrams") return TokenMode::char_bigrams;
  throw ConfigError("token_mode must be words or char_bigrams");
}

inline void read_endpoint(const YAML::Node& n, HttpEndpoint& e, const std::string& path) {
  read(n, "base_url", e.base_url, path);
  read(n, "model", e.model, path);
  read(n, "api_key_env", e.api_key_env, path);
  read(n, "timeout_s", e.timeout_s, path);
  if (e.timeout_s <= 0) throw ConfigError(path + ".timeout_s must be positive");
}

// Walks `a.b.c` creating maps as needed and stores the YAML-parsed value.
inline void apply_override(YAML::Node& root, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
  const std::string path = trim(assignment.substr(0, eq));
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot parse override value for '" + path + "': " + e.what());
  }
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto dot = path.find('.', start);
    parts.push_back(path.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node child = chain.back()[parts[i]];
    if (!child.IsDefined() || child.IsNull()) {
      chain.back()[parts[i]] = YAML::Node(YAML::NodeType::Map);
      child = chain.back()[parts[i]];
    }
    chain.push_back(child);
  }
  chain.back()[parts.back()] = value;
}

}  // namespace detail

inline RunConfig parse_config(YAML::Node root, const std::vector<std::string>& overrides = {},
                              const std::filesystem::path& base_dir = {}) {
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const auto& o : overrides) detail::apply_override(root, o);
  detail::check_keys(root, "");
  using detail::read;
  RunConfig c;
  if (!root["seed"] || root["seed"].IsNull()) throw ConfigError("config key 'seed' is required");
  read(root, "seed", c.seed, "");
  auto path_of = [&](const char* key, std::filesystem::path& out) {
    std::string s;
    read(root, key, s, "");
    if (s.empty()) return;
    std::filesystem::path p(s);
    out = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  path_of("corpus", c.corpus);
  path_of("panel", c.panel);
  path_of("run_dir", c.run_dir);
  path_of("cache_dir", c.cache_dir);
  read(root, "slices", c.slices, "");
  for (const auto& s : c.slices) parse_slice_key(s);

  if (auto p = root["provider"]) {
    std::string mode = "auto";
    read(p, "mode", mode, "provider");
    if (mode == "auto") c.provider.mode = ProviderMode::auto_detect;
    else if (mode == "mock") c.provider.mode = ProviderMode::mock;
    else if (mode == "http") c.provider.mode = ProviderMode::http;
    else throw ConfigError("provider.mode must be auto, mock or http");
    detail::read_endpoint(p["llm"], c.provider.llm, "provider.llm");
    detail::read_endpoint(p["embedding"], c.provider.embedding, "provider.embedding");
    read(p, "mock_embedding_dim", c.provider.mock_embedding_dim, "provider");
    read(p, "max_retries", c.provider.max_retries, "provider");
    read(p, "max_in_flight", c.provider.max_in_flight, "provider");
    std::string lang = "en";
    read(p, "language", lang, "provider");
    if (lang == "en") c.provider.language = prompts::Language::en;
    else if (lang == "ja") c.provider.language = prompts::Language::ja;
    else throw ConfigError("provider.language must be en or ja");
    if (c.provider.mock_embedding_dim < 2) throw ConfigError("provider.mock_embedding_dim must be at least 2");
    if (c.provider.max_in_flight < 1) throw ConfigError("provider.max_in_flight must be at least 1");
    if (c.provider.max_retries < 0) throw ConfigError("provider.max_retries must be non-negative");
  }

  auto& pc = c.pipeline;
  if (auto p = root["pipeline"]) {
    const std::string path = "pipeline";
    read(p, "min_cluster_size", pc.min_cluster_size, path);
    read(p, "min_samples", pc.min_samples, path);
    read(p, "variance_target", pc.variance_target, path);
    read(p, "max_dim", pc.max_dim, path);
    read(p, "pca_chunk", pc.pca_chunk, path);
    read(p, "embed_batch", pc.embed_batch, path);
    read(p, "top_words", pc.top_words, path);
    read(p, "n_representatives", pc.n_representatives, path);
    read(p, "mmr_lambda", pc.mmr_lambda, path);
    read(p, "rename_mmr_lambda", pc.rename_mmr_lambda, path);
    read(p, "split_sample", pc.split_sample, path);
    read(p, "tau_quantile", pc.tau_quantile, path);
    read(p, "n_clusters", pc.n_clusters, path);
    read(p, "assign_batch", pc.assign_batch, path);
    read(p, "corpus_meta", pc.corpus_meta, path);
    std::string mode = "words";
    read(p, "token_mode", mode, path);
    pc.token_mode = detail::parse_token_mode(mode);
    std::vector<double> w;
    read(p, "weights", w, path);
    if (!w.empty()) {
      if (w.size() != 3) throw ConfigError("pipeline.weights needs three values (name, description, documents)");
      pc.weights = {w[0], w[1], w[2]};
    }
  }
  pc.seed = c.seed;
  pc.weights.validate();
  if (pc.min_cluster_size < 2) throw ConfigError("pipeline.min_cluster_size must be at least 2");
  if (!(pc.variance_target > 0.0 && pc.variance_target <= 1.0)) throw ConfigError("pipeline.variance_target must be in (0, 1]");
  if (pc.max_dim < 1 || pc.pca_chunk < 1 || pc.embed_batch < 1 || pc.assign_batch < 1)
    throw ConfigError("pipeline sizes must be positive");
  if (pc.top_words < 2 || pc.n_representatives < 1 || pc.split_sample < 1) throw ConfigError("pipeline sample sizes are too small");
  if (pc.mmr_lambda < 0.0 || pc.mmr_lambda > 1.0 || pc.rename_mmr_lambda < 0.0 || pc.rename_mmr_lambda > 1.0)
    throw ConfigError("MMR lambdas must be in [0, 1]");
  if (!(pc.tau_quantile > 0.0 && pc.tau_quantile < 1.0)) throw ConfigError("pipeline.tau_quantile must be in (0, 1)");
  for (int n : pc.n_clusters)
    if (n < 1) throw ConfigError("pipeline.n_clusters entries must be positive");

  if (auto m = root["metrics"]) {
    read(m, "alignment_sample", c.metrics.alignment_sample, "metrics");
    read(m, "semantic_edge_threshold", c.metrics.semantic_edge_threshold, "metrics");
    std::string mode = "words";
    read(m, "token_mode", mode, "metrics");
    c.metrics.token_mode = detail::parse_token_mode(mode);
  }
  c.metrics.seed = c.seed;
  if (c.metrics.alignment_sample < 1) throw ConfigError("metrics.alignment_sample must be positive");
  if (c.metrics.semantic_edge_threshold < 0 || c.metrics.semantic_edge_threshold > 10)
    throw ConfigError("metrics.semantic_edge_threshold must be in [0, 10]");

  auto& oc = c.outcomes;
  if (auto o = root["outcomes"]) {
    const std::string path = "outcomes";
    read(o, "thresholds", oc.thresholds, path);
    read(o, "explanatory_threshold", oc.explanatory_threshold, path);
    read(o, "cv_folds", oc.cv_folds, path);
    read(o, "l1_ratios", oc.l1_ratios, path);
    read(o, "min_posts", oc.min_posts, path);
    read(o, "significance", oc.significance, path);
    read(o, "min_significant_thresholds", oc.min_significant_thresholds, path);
    std::string se = "conventional", denom = "slice";
    read(o, "standard_errors", se, path);
    read(o, "denominator", denom, path);
    if (se == "conventional") oc.standard_errors = StandardErrors::conventional;
    else if (se == "cluster_firm") oc.standard_errors = StandardErrors::cluster_firm;
    else throw ConfigError("outcomes.standard_errors must be conventional or cluster_firm");
    if (denom == "slice") oc.global_denominator = false;
    else if (denom == "global") oc.global_denominator = true;
    else throw ConfigError("outcomes.denominator must be slice or global");
  }
  if (oc.thresholds.empty()) throw ConfigError("outcomes.thresholds must not be empty");
  if (oc.cv_folds < 2) throw ConfigError("outcomes.cv_folds must be at least 2");
  if (!(oc.significance > 0.0 && oc.significance < 1.0)) throw ConfigError("outcomes.significance must be in (0, 1)");
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_config(root, overrides, path.parent_path());
}

inline json to_json(const RunConfig& c) {
  auto endpoint = [](const HttpEndpoint& e) {
    return json{{"base_url", e.base_url}, {"model", e.model}, {"api_key_env", e.api_key_env}, {"timeout_s", e.timeout_s}};
  };
  const char* mode = c.provider.mode == ProviderMode::mock ? "mock" : c.provider.mode == ProviderMode::http ? "http" : "auto";
  return {{"corpus", c.corpus.string()},
          {"panel", c.panel.string()},
          {"run_dir", c.run_dir.string()},
          {"cache_dir", c.effective_cache_dir().string()},
          {"seed", c.seed},
          {"slices", c.slices},
          {"provider",
           {{"mode", mode},
            {"llm", endpoint(c.provider.llm)},
            {"embedding", endpoint(c.provider.embedding)},
            {"mock_embedding_dim", c.provider.mock_embedding_dim},
            {"max_retries", c.provider.max_retries},
            {"max_in_flight", c.provider.max_in_flight},
            {"language", c.provider.language == prompts::Language::en ? "en" : "ja"}}},
          {"pipeline", to_json(c.pipeline)},
          {"metrics", to_json(c.metrics)},
          {"outcomes",
           {{"thresholds", c.outcomes.thresholds},
            {"explanatory_threshold", c.outcomes.explanatory_threshold},
            {"cv_folds", c.outcomes.cv_folds},
            {"l1_ratios", c.outcomes.l1_ratios},
            {"min_posts", c.outcomes.min_posts},
            {"significance", c.outcomes.significance},
            {"min_significant_thresholds", c.outcomes.min_significant_thresholds},
            {"standard_errors", c.outcomes.standard_errors == StandardErrors::conventional ? "conventional" : "cluster_firm"},
            {"denominator", c.outcomes.global_denominator ? "global" : "slice"}}}};
}

}  // namespace topicflow
