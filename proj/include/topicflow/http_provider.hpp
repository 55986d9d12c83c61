#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <thread>
#include <string>
#include <vector>

#include "httplib.h"
#include "topicflow/common.hpp"
#include "topicflow/embedding.hpp"
#include "topicflow/llm.hpp"

namespace topicflow {

// OpenAI-compatible REST endpoint: `base_url` is scheme://host[:port][/prefix]
// and requests go to <prefix>/chat/completions or <prefix>/embeddings.
struct HttpTarget {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without a trailing slash
  std::string api_key;
  std::string model;
  int timeout_s = 120;
};

inline HttpTarget make_http_target(const std::string& base_url, const std::string& model, const std::string& api_key,
                                   int timeout_s) {
  auto scheme = base_url.find("://");
  if (scheme == std::string::npos) throw ConfigError("base_url needs a scheme: " + base_url);
  auto path = base_url.find('/', scheme + 3);
  HttpTarget t;
  t.origin = base_url.substr(0, path);
  t.prefix = path == std::string::npos ? "" : base_url.substr(path);
  while (!t.prefix.empty() && t.prefix.back() == '/') t.prefix.pop_back();
  t.api_key = api_key;
  t.model = model;
  t.timeout_s = timeout_s;
  if (model.empty()) throw ConfigError("provider model name is empty");
  return t;
}

inline std::string credential_from_env(const std::string& var) {
  const char* v = var.empty() ? nullptr : std::getenv(var.c_str());
  if (!v || !*v) throw ConfigError("credential environment variable " + var + " is not set");
  return v;
}

namespace detail {

inline json post_json(const HttpTarget& t, const std::string& endpoint, const json& body) {
  httplib::Client client(t.origin);
  client.set_connection_timeout(t.timeout_s, 0);
  client.set_read_timeout(t.timeout_s, 0);
  client.set_write_timeout(t.timeout_s, 0);
  httplib::Headers headers;
  if (!t.api_key.empty()) headers.emplace("Authorization", "Bearer " + t.api_key);
  auto res = client.Post(t.prefix + endpoint, headers, body.dump(), "application/json");
  if (!res) throw TransportError("request to " + t.origin + t.prefix + endpoint + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    const bool retry = res->status == 408 || res->status == 409 || res->status == 429 || res->status >= 500;
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + endpoint + ": " + res->body.substr(0, 300), retry);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception&) {
    throw TransportError("unparsable response body from " + endpoint, true);
  }
}

}  // namespace detail

class HttpLlmProvider : public LlmProvider {
 public:
  explicit HttpLlmProvider(HttpTarget target) : t_(std::move(target)) {}

  std::string model_id() const override { return t_.model; }

  std::string complete(const LlmRequest& r) override {
    json body{{"model", t_.model},
              {"temperature", 0},
              {"messages", json::array({{{"role", "user"}, {"content", r.prompt}}})}};
    json out = detail::post_json(t_, "/chat/completions", body);
    try {
      return out.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw TransportError("chat response has no message content", true);
    }
  }

 private:
  HttpTarget t_;
};

class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpTarget target) : t_(std::move(target)) {}

  std::string provider_id() const override { return "http:" + t_.model; }

  std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) override {
    json out = detail::post_json(t_, "/embeddings", {{"model", t_.model}, {"input", texts}});
    std::vector<std::vector<float>> vecs(texts.size());
    try {
      const auto& data = out.at("data");
      if (data.size() != texts.size()) throw TransportError("embedding response has the wrong number of vectors", true);
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t idx = data[i].value("index", i);
        if (idx >= vecs.size()) throw TransportError("embedding response index out of range", false);
        vecs[idx] = data[i].at("embedding").get<std::vector<float>>();
      }
    } catch (const json::exception&) {
      throw TransportError("malformed embedding response", true);
    }
    return vecs;
  }

 private:
  HttpTarget t_;
};

// Retries retryable transport failures with exponential backoff.
class RetryingEmbeddingProvider : public EmbeddingProvider {
 public:
  RetryingEmbeddingProvider(std::unique_ptr<EmbeddingProvider> inner, int max_retries,
                            std::chrono::milliseconds backoff_base = std::chrono::milliseconds(200))
      : inner_(std::move(inner)), max_retries_(max_retries), backoff_(backoff_base) {}

  std::string provider_id() const override { return inner_->provider_id(); }

  std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) override {
    for (int retry = 0;; ++retry) {
      try {
        return inner_->embed_batch(texts);
      } catch (const TransportError& e) {
        if (!e.retryable || retry >= max_retries_)
          throw TransportError(std::string(e.what()) + " (attempts: " + std::to_string(retry + 1) + ")", false);
        std::this_thread::sleep_for(backoff_ * (1 << retry));
      }
    }
  }

 private:
  std::unique_ptr<EmbeddingProvider> inner_;
  int max_retries_;
  std::chrono::milliseconds backoff_;
};

}  // namespace topicflow
