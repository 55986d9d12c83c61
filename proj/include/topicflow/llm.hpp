#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "topicflow/common.hpp"
#include "topicflow/log.hpp"
#include "topicflow/prompts.hpp"
#include "topicflow/rubrics.hpp"

namespace topicflow {

enum class TemplateId { extract, name_topic, assign_topics, polarity_split, child_assign, judge };

inline std::string to_string(TemplateId id) {
  switch (id) {
    case TemplateId::extract: return "extract";
    case TemplateId::name_topic: return "name_topic";
    case TemplateId::assign_topics: return "assign_topics";
    case TemplateId::polarity_split: return "polarity_split";
    case TemplateId::child_assign: return "child_assign";
    case TemplateId::judge: return "judge";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Requests and providers

using Bindings = std::map<std::string, std::string>;

struct LlmRequest {
  TemplateId template_id = TemplateId::extract;
  std::optional<RubricId> rubric;  // judge requests only
  Bindings bindings;               // values bound into the template
  std::string prompt;              // fully rendered text sent to the model
  int attempt = 0;                 // re-ask counter, 0 for the first ask
};

// Transport-level failure.  Retryable failures are retried with backoff.
struct TransportError : ProviderError {
  TransportError(const std::string& what, bool retryable = true) : ProviderError(what), retryable(retryable) {}
  bool retryable;
};

struct SchemaViolation : ProviderError {
  explicit SchemaViolation(const std::string& what) : ProviderError("schema violation: " + what) {}
};

struct InconsistentResponse : ProviderError {
  explicit InconsistentResponse(const std::string& what) : ProviderError("inconsistent response: " + what) {}
};

struct CacheCorruption : DataError {
  explicit CacheCorruption(const std::string& what) : DataError("cache corruption: " + what) {}
};

// A chat-completion backend.  Implementations must be safe for concurrent use.
class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  // Stable model identifier; part of the cache key.
  virtual std::string model_id() const = 0;
  // Returns raw model text for the request.  Throws TransportError.
  virtual std::string complete(const LlmRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Templates

struct PromptTemplate {
  TemplateId template_id;
  std::string body;

  std::vector<std::string> placeholders() const {
    std::vector<std::string> names;
    for (std::size_t pos = body.find("{{"); pos != std::string::npos; pos = body.find("{{", pos + 2)) {
      auto end = body.find("}}", pos);
      if (end == std::string::npos) break;
      auto name = body.substr(pos + 2, end - pos - 2);
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
    return names;
  }

  // Substitutes every {{name}}; an unbound placeholder is a config error.
  std::string render(const Bindings& values) const {
    std::string out;
    out.reserve(body.size() + 256);
    std::size_t pos = 0;
    while (true) {
      auto open = body.find("{{", pos);
      if (open == std::string::npos) {
        out.append(body, pos, std::string::npos);
        break;
      }
      auto close = body.find("}}", open);
      if (close == std::string::npos) throw ConfigError("unterminated placeholder in template " + to_string(template_id));
      out.append(body, pos, open - pos);
      auto name = body.substr(open + 2, close - open - 2);
      auto it = values.find(name);
      if (it == values.end()) throw ConfigError("unbound placeholder {{" + name + "}} in template " + to_string(template_id));
      out += it->second;
      pos = close + 2;
    }
    if (trim(out).empty()) throw ConfigError("rendered prompt is empty");
    return out;
  }
};

inline PromptTemplate prompt_template(TemplateId id, prompts::Language lang) {
  using prompts::Language;
  bool ja = lang == Language::ja;
  switch (id) {
    case TemplateId::extract: return {id, ja ? prompts::kExtractJa : prompts::kExtractEn};
    case TemplateId::name_topic: return {id, ja ? prompts::kNameTopicJa : prompts::kNameTopicEn};
    case TemplateId::assign_topics: return {id, ja ? prompts::kAssignTopicsJa : prompts::kAssignTopicsEn};
    case TemplateId::polarity_split: return {id, ja ? prompts::kPolaritySplitJa : prompts::kPolaritySplitEn};
    case TemplateId::child_assign: return {id, ja ? prompts::kChildAssignJa : prompts::kChildAssignEn};
    case TemplateId::judge: break;
  }
  throw ConfigError("judge prompts are rendered from rubrics");
}

inline std::string render_judge_prompt(const JudgeRubric& r, const Bindings& inputs, prompts::Language lang) {
  for (const auto& name : r.input_names)
    if (!inputs.count(name)) throw ConfigError("judge input '" + name + "' not bound for rubric " + to_string(r.id));
  if (r.id == RubricId::semantic_similarity) {
    PromptTemplate t{TemplateId::judge,
                     lang == prompts::Language::ja ? prompts::kSemanticSimilarityJa : prompts::kSemanticSimilarityEn};
    return t.render(inputs);
  }
  std::ostringstream os;
  os << "# Criteria name\n" << r.criteria_name << "\n\n# Evaluation steps\n";
  for (std::size_t i = 0; i < r.criteria_steps.size(); ++i) os << i + 1 << ". " << r.criteria_steps[i] << "\n";
  os << "\n# Criteria (prompt)\n" << r.criteria_question << "\n\n# Rubric (score interpretation)\n";
  for (const auto& range : r.score_ranges) os << range.lo << "-" << range.hi << ": " << range.description << "\n";
  os << "\n# Inputs\n";
  for (const auto& name : r.input_names) os << "## " << name << "\n" << inputs.at(name) << "\n";
  os << "\n# Output format\n{\n  \"score\": int,\n  \"reason\": str\n}";
  return os.str();
}

// ---------------------------------------------------------------------------
// Response schemas

enum class FieldType { string, integer, boolean, array, object };

struct SchemaField {
  std::string name;
  FieldType type;
  bool required = true;
  std::vector<SchemaField> items;  // element fields when type == array of objects
};

struct ResponseSchema {
  std::string name;
  std::vector<SchemaField> fields;
};

namespace detail {

inline bool type_matches(const json& v, FieldType t) {
  switch (t) {
    case FieldType::string: return v.is_string();
    case FieldType::integer: return v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()));
    case FieldType::boolean: return v.is_boolean();
    case FieldType::array: return v.is_array();
    case FieldType::object: return v.is_object();
  }
  return false;
}

inline void validate_fields(const json& obj, const std::vector<SchemaField>& fields, const std::string& where) {
  if (!obj.is_object()) throw SchemaViolation(where + " is not an object");
  for (const auto& f : fields) {
    auto it = obj.find(f.name);
    if (it == obj.end()) {
      if (f.required) throw SchemaViolation(where + " missing field '" + f.name + "'");
      continue;
    }
    if (!type_matches(*it, f.type)) throw SchemaViolation(where + "." + f.name + " has the wrong type");
    if (f.type == FieldType::array && !f.items.empty()) {
      for (std::size_t i = 0; i < it->size(); ++i)
        validate_fields((*it)[i], f.items, where + "." + f.name + "[" + std::to_string(i) + "]");
    }
  }
}

}  // namespace detail

inline void validate(const json& value, const ResponseSchema& schema) {
  detail::validate_fields(value, schema.fields, schema.name);
}

// Pulls the outermost JSON object out of model text (tolerates code fences
// and surrounding prose).
inline json parse_model_json(const std::string& raw) {
  auto b = raw.find('{');
  auto e = raw.rfind('}');
  if (b == std::string::npos || e == std::string::npos || e < b) throw SchemaViolation("no JSON object in response");
  try {
    return json::parse(raw.substr(b, e - b + 1));
  } catch (const json::parse_error& err) {
    throw SchemaViolation(std::string("unparsable JSON: ") + err.what());
  }
}

namespace schemas {

inline const ResponseSchema& extraction() {
  static const ResponseSchema s{
      "extraction",
      {{"extractions",
        FieldType::array,
        true,
        {{"text", FieldType::string},
         {"target_leader_layer", FieldType::string},
         {"element_type", FieldType::string},
         {"implicit_extraction", FieldType::boolean, false},
         {"change_meaning", FieldType::boolean, false},
         {"is_past", FieldType::boolean, false}}}}};
  return s;
}

inline const ResponseSchema& topic_name() {
  static const ResponseSchema s{
      "topic_name", {{"topic_name", FieldType::string}, {"topic_short_description", FieldType::string}}};
  return s;
}

inline const ResponseSchema& topic_assignment() {
  static const ResponseSchema s{
      "topic_assignment",
      {{"topic_list",
        FieldType::array,
        true,
        {{"topic_id", FieldType::integer}, {"topic_name", FieldType::string, false}, {"reason", FieldType::string, false}}}}};
  return s;
}

inline const ResponseSchema& polarity_split() {
  static const ResponseSchema s{
      "polarity_split",
      {{"contain_opposing_stance", FieldType::boolean},
       {"child_topics",
        FieldType::array,
        true,
        {{"child_topic_name", FieldType::string},
         {"child_topic_short_description", FieldType::string},
         {"document_examples", FieldType::string, false},
         {"opposing_stance_reason", FieldType::string, false}}}}};
  return s;
}

inline const ResponseSchema& child_assignment() {
  static const ResponseSchema s{
      "child_assignment",
      {{"topic_id", FieldType::integer}, {"topic_name", FieldType::string, false}, {"reason", FieldType::string, false}}};
  return s;
}

inline const ResponseSchema& judge() {
  static const ResponseSchema s{"judge", {{"score", FieldType::integer}, {"reason", FieldType::string, false}}};
  return s;
}

}  // namespace schemas

// ---------------------------------------------------------------------------
// Response cache: one JSON file per (model, prompt hash).  Single writer via
// the mutex, readers see whole files thanks to atomic replacement.

class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static std::string key(const std::string& model_id, const std::string& prompt) {
    return content_hash(model_id + "\n" + prompt);
  }

  std::optional<json> get(const std::string& model_id, const std::string& prompt) {
    auto k = key(model_id, prompt);
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(k); it != memory_.end()) return it->second;
    if (dir_.empty()) return std::nullopt;
    auto path = file_for(model_id, k);
    if (!std::filesystem::exists(path)) return std::nullopt;
    json entry;
    try {
      entry = json::parse(read_file(path));
    } catch (const json::parse_error&) {
      throw CacheCorruption(path.string());
    }
    if (!entry.contains("parsed") || !entry.contains("prompt_hash") || entry["prompt_hash"] != k)
      throw CacheCorruption(path.string());
    memory_[k] = entry["parsed"];
    return entry["parsed"];
  }

  void put(const std::string& model_id, const LlmRequest& request, const std::string& raw, const json& parsed) {
    auto k = key(model_id, request.prompt);
    std::lock_guard lock(mutex_);
    memory_[k] = parsed;
    if (dir_.empty()) return;
    json entry{{"model_id", model_id},
               {"prompt_hash", k},
               {"template", to_string(request.template_id)},
               {"request", request.prompt},
               {"raw_response", raw},
               {"parsed", parsed},
               {"timestamp", static_cast<std::int64_t>(std::time(nullptr))}};
    write_file_atomic(file_for(model_id, k), entry.dump(2));
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path file_for(const std::string& model_id, const std::string& k) const {
    std::string safe;
    for (char c : model_id) safe.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_');
    return dir_ / safe / (k + ".json");
  }

  std::filesystem::path dir_;
  std::mutex mutex_;
  std::unordered_map<std::string, json> memory_;
};

// ---------------------------------------------------------------------------
// Client

struct ClientOptions {
  std::filesystem::path cache_dir;  // empty: in-memory cache only
  int max_retries = 5;              // transport retries
  int schema_reasks = 2;            // re-asks after an unparsable response
  int judge_reasks = 1;             // re-asks after an out-of-range score
  std::chrono::milliseconds backoff_base{200};
  std::size_t max_in_flight = 4;
  prompts::Language language = prompts::Language::en;
};

struct ClientStats {
  std::size_t provider_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
};

class LlmClient {
 public:
  LlmClient(std::shared_ptr<LlmProvider> provider, ClientOptions options = {})
      : provider_(std::move(provider)), options_(std::move(options)), cache_(options_.cache_dir) {
    if (!provider_) throw ConfigError("LLM provider not configured");
  }

  const ClientOptions& options() const { return options_; }
  prompts::Language language() const { return options_.language; }
  std::string model_id() const { return provider_->model_id(); }

  ClientStats stats() const { return {calls_.load(), hits_.load(), misses_.load()}; }

  // Sends the request (or serves it from cache), parses and validates the
  // response.  Unparsable output is re-asked up to schema_reasks times.
  json complete(LlmRequest request, const ResponseSchema& schema) {
    std::string last_error;
    const std::string base_prompt = request.prompt;
    for (int attempt = 0; attempt <= options_.schema_reasks; ++attempt) {
      request.attempt = attempt;
      request.prompt = attempt == 0 ? base_prompt : with_reask_note(base_prompt, last_error);
      if (auto cached = cache_.get(provider_->model_id(), request.prompt)) {
        ++hits_;
        return *cached;
      }
      ++misses_;
      std::string raw = call_with_retry(request);
      try {
        json parsed = parse_model_json(raw);
        validate(parsed, schema);
        cache_.put(provider_->model_id(), request, raw, parsed);
        return parsed;
      } catch (const SchemaViolation& e) {
        last_error = e.what();
        log::warn("response for " + to_string(request.template_id) + " failed validation: " + last_error);
      }
    }
    throw SchemaViolation(last_error + " (after " + std::to_string(options_.schema_reasks) + " re-asks)");
  }

  static std::string with_reask_note(const std::string& prompt, const std::string& problem) {
    return prompt + "\n\n# Note\nThe previous answer was rejected (" + problem +
           "). Answer again with JSON that follows the output format exactly.";
  }

 private:
  std::string call_with_retry(const LlmRequest& request) {
    for (int retry = 0;; ++retry) {
      try {
        ++calls_;
        return provider_->complete(request);
      } catch (const TransportError& e) {
        if (!e.retryable || retry >= options_.max_retries)
          throw TransportError(std::string(e.what()) + " (attempts: " + std::to_string(retry + 1) + ")", false);
        auto delay = options_.backoff_base * (1 << retry);
        if (delay.count() > 0) std::this_thread::sleep_for(delay);
      }
    }
  }

  std::shared_ptr<LlmProvider> provider_;
  ClientOptions options_;
  ResponseCache cache_;
  std::atomic<std::size_t> calls_{0}, hits_{0}, misses_{0};
};

// ---------------------------------------------------------------------------
// Typed operations

struct TopicLabel {
  std::string name;
  std::string description;
};

struct TopicDef {
  int id;
  std::string name;
  std::string description;
};

struct Assignment {
  int topic_id;
  std::string reason;
};

struct ChildTopic {
  std::string name;
  std::string description;
  std::string examples;
  std::string reason;
};

struct PolaritySplit {
  bool contain_opposing_stance = false;
  std::vector<ChildTopic> children;
};

struct JudgeScore {
  int raw = 0;
  double normalized = 0.0;
  std::string reason;
};

namespace detail {

inline std::string single_line(const std::string& s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == '\n' || c == '\r' || c == '\t' || c == ' ') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

inline std::string numbered(const std::vector<std::string>& docs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < docs.size(); ++i) os << "- " << single_line(docs[i]) << "\n";
  return os.str();
}

inline std::string definitions(const std::vector<TopicDef>& defs) {
  std::ostringstream os;
  for (const auto& d : defs) os << d.id << ", " << single_line(d.name) << " (" << single_line(d.description) << ")\n";
  return os.str();
}

}  // namespace detail

inline TopicLabel name_topic(LlmClient& client, const std::vector<std::string>& top_words,
                             const std::vector<std::string>& rep_docs, const std::string& corpus_meta) {
  if (rep_docs.empty()) throw DataError("name_topic needs at least one representative document");
  std::string words;
  for (std::size_t i = 0; i < top_words.size(); ++i) words += (i ? ", " : "") + top_words[i];
  LlmRequest req;
  req.template_id = TemplateId::name_topic;
  req.bindings = {{"document_metadata", corpus_meta},
                  {"topic_top_words", words},
                  {"topic_representative_documents", detail::numbered(rep_docs)}};
  req.prompt = prompt_template(req.template_id, client.language()).render(req.bindings);
  json out = client.complete(req, schemas::topic_name());
  TopicLabel label{detail::single_line(out["topic_name"].get<std::string>()),
                   detail::single_line(out["topic_short_description"].get<std::string>())};
  if (label.name.empty() || label.description.empty()) throw SchemaViolation("empty topic name or description");
  return label;
}

// Ids outside topic_defs are coerced to -1 with a warning.  The returned list
// is deduplicated and never empty: no match is reported as a single -1.
inline std::vector<Assignment> assign_topics(LlmClient& client, const std::string& doc_text,
                                             const std::vector<TopicDef>& topic_defs, const std::string& doc_meta) {
  if (topic_defs.empty()) throw DataError("assign_topics needs at least one candidate topic");
  LlmRequest req;
  req.template_id = TemplateId::assign_topics;
  req.bindings = {{"document_metadata", doc_meta},
                  {"topic_definitions", detail::definitions(topic_defs)},
                  {"input_text", doc_text}};
  req.prompt = prompt_template(req.template_id, client.language()).render(req.bindings);
  json out = client.complete(req, schemas::topic_assignment());
  std::set<int> valid;
  for (const auto& d : topic_defs) valid.insert(d.id);
  std::vector<Assignment> result;
  std::set<int> seen;
  for (const auto& item : out["topic_list"]) {
    int id = static_cast<int>(item["topic_id"].get<double>());
    std::string reason = item.value("reason", "");
    if (id != -1 && !valid.count(id)) {
      log::warn("assign_topics: model returned unknown topic id " + std::to_string(id) + ", treated as -1");
      id = -1;
    }
    if (id == -1 || !seen.insert(id).second) continue;
    result.push_back({id, reason});
  }
  if (result.empty()) result.push_back({-1, "Other"});
  return result;
}

inline PolaritySplit polarity_split(LlmClient& client, const TopicLabel& topic,
                                    const std::vector<std::string>& sampled_docs, const std::string& corpus_meta) {
  if (sampled_docs.empty()) throw DataError("polarity_split needs at least one document");
  LlmRequest req;
  req.template_id = TemplateId::polarity_split;
  req.bindings = {{"topic_name", topic.name},
                  {"topic_short_description", topic.description},
                  {"document_metadata", corpus_meta},
                  {"topic_documents", detail::numbered(sampled_docs)}};
  const std::string base = prompt_template(req.template_id, client.language()).render(req.bindings);
  for (int attempt = 0; attempt < 2; ++attempt) {
    req.prompt = attempt == 0 ? base
                              : LlmClient::with_reask_note(
                                    base, "contain_opposing_stance was true but fewer than two child topics were given");
    json out = client.complete(req, schemas::polarity_split());
    PolaritySplit split;
    split.contain_opposing_stance = out["contain_opposing_stance"].get<bool>();
    if (!split.contain_opposing_stance) return split;
    for (const auto& c : out["child_topics"]) {
      split.children.push_back({detail::single_line(c["child_topic_name"].get<std::string>()),
                                detail::single_line(c["child_topic_short_description"].get<std::string>()),
                                c.value("document_examples", ""), c.value("opposing_stance_reason", "")});
    }
    if (split.children.size() >= 2) return split;
  }
  throw InconsistentResponse("split requested for '" + topic.name + "' with fewer than two children");
}

// Returns the chosen child id, or -1 for "Other".
inline int child_assign(LlmClient& client, const TopicLabel& parent, const std::string& doc_text,
                        const std::vector<TopicDef>& children, const std::string& doc_meta) {
  LlmRequest req;
  req.template_id = TemplateId::child_assign;
  req.bindings = {{"parent_topic", parent.name + " (" + parent.description + ")"},
                  {"input_text", doc_text},
                  {"document_metadata", doc_meta},
                  {"child_topic_definition", detail::definitions(children)}};
  req.prompt = prompt_template(req.template_id, client.language()).render(req.bindings);
  json out = client.complete(req, schemas::child_assignment());
  int id = static_cast<int>(out["topic_id"].get<double>());
  for (const auto& c : children)
    if (c.id == id) return id;
  if (id != -1) log::warn("child_assign: unknown child id " + std::to_string(id) + ", treated as Other");
  return -1;
}

// Out-of-range scores are re-asked once and then clamped with a warning.
inline JudgeScore judge(LlmClient& client, const JudgeRubric& rubric, const Bindings& inputs) {
  LlmRequest req;
  req.template_id = TemplateId::judge;
  req.rubric = rubric.id;
  req.bindings = inputs;
  const std::string base = render_judge_prompt(rubric, inputs, client.language());
  json out;
  int raw = 0;
  for (int attempt = 0;; ++attempt) {
    req.prompt = attempt == 0 ? base : LlmClient::with_reask_note(base, "score must be an integer from 0 to 10");
    out = client.complete(req, schemas::judge());
    raw = static_cast<int>(out["score"].get<double>());
    if ((raw >= 0 && raw <= 10) || attempt >= client.options().judge_reasks) break;
  }
  if (raw < 0 || raw > 10) {
    log::warn("judge " + to_string(rubric.id) + ": score " + std::to_string(raw) + " clamped to [0,10]");
    raw = std::clamp(raw, 0, 10);
  }
  return {raw, raw / 10.0, out.value("reason", "")};
}

}  // namespace topicflow
