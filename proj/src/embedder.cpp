#include "kggen/embedder.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "kggen/errors.hpp"
#include "kggen/model.hpp"
#include "kggen/text.hpp"

namespace kggen {

using nlohmann::json;

std::vector<EmbeddingVector> embed(std::span<const std::string> texts, Embedder& embedder) {
  auto vectors = embedder.embed_batch(texts);
  if (vectors.size() != texts.size()) {
    throw ConfigError("embedder returned " + std::to_string(vectors.size()) + " vectors for " +
                      std::to_string(texts.size()) + " texts");
  }
  for (const auto& v : vectors) {
    if (v.dim() != embedder.dim()) {
      throw ConfigError("embedder returned a vector of dimension " + std::to_string(v.dim()) + ", expected " +
                        std::to_string(embedder.dim()));
    }
  }
  return vectors;
}

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw ConfigError("hashing embedder dimension must be positive");
}

std::vector<EmbeddingVector> HashingEmbedder::embed_batch(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    std::vector<double> v(dim_, 0.0);
    for (const auto& token : text::tokenize(t)) v[text::fnv1a64(token) % dim_] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm == 0.0) {
      spdlog::warn("embedding of a text without tokens is the zero vector");
    } else {
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
    }
    out.emplace_back(std::move(v));
  }
  return out;
}

RemoteEmbedder::RemoteEmbedder(EmbedderConfig config) : config_(std::move(config)), dim_(config_.dim) {
  if (config_.endpoint.empty()) throw ConfigError("remote embedder requires an endpoint URL");
  if (config_.batch_size == 0) throw ConfigError("embedding batch size must be positive");
  split_url(config_.endpoint);
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
  }
}

std::vector<EmbeddingVector> RemoteEmbedder::request(std::span<const std::string> texts) {
  auto [base, path] = split_url(config_.endpoint);
  httplib::Client client(base);
  client.set_connection_timeout(30);
  client.set_read_timeout(300);
  if (!api_key_.empty()) client.set_bearer_token_auth(api_key_);
  json body{{"model", config_.model_name}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw BackendError("embedding request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw BackendError("HTTP " + std::to_string(res->status) + " from embedding service");
  json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("data") || !reply["data"].is_array()) {
    throw BackendError("embedding service returned an unexpected body");
  }
  std::vector<EmbeddingVector> out;
  for (const auto& item : reply["data"]) {
    if (!item.contains("embedding") || !item["embedding"].is_array()) {
      throw BackendError("embedding entry without an \"embedding\" array");
    }
    out.emplace_back(item["embedding"].get<std::vector<double>>());
  }
  return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += config_.batch_size) {
    auto batch = texts.subspan(start, std::min(config_.batch_size, texts.size() - start));
    std::string problem;
    bool done = false;
    for (int attempt = 0; attempt <= config_.max_retries && !done; ++attempt) {
      try {
        auto vectors = request(batch);
        if (vectors.size() != batch.size()) throw BackendError("embedding count mismatch");
        std::size_t unknown = 0;
        if (!vectors.empty()) dim_.compare_exchange_strong(unknown, vectors.front().dim());
        for (auto& v : vectors) out.push_back(std::move(v));
        done = true;
      } catch (const BackendError& e) {
        problem = e.what();
        spdlog::warn("embedding batch attempt {} failed: {}", attempt + 1, problem);
      }
    }
    if (!done) throw BackendError("embedding failed after retries: " + problem);
  }
  return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
  if (config.kind == EmbedderKind::Remote) return std::make_unique<RemoteEmbedder>(config);
  return std::make_unique<HashingEmbedder>(config.dim);
}

}  // namespace kggen
