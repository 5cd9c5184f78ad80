#pragma once

#include <atomic>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kggen/index.hpp"

namespace kggen {

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;
};

// One vector per text. Throws ConfigError when the backend returns the wrong
// number of vectors or a vector of the wrong dimension.
std::vector<EmbeddingVector> embed(std::span<const std::string> texts, Embedder& embedder);

// Offline embedder: every token (text::tokenize) adds 1 to bucket
// fnv1a64(token) % dim, and the result is L2-normalized. Word order is
// ignored; an empty string maps to the zero vector.
class HashingEmbedder : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 64);
  std::size_t dim() const override { return dim_; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
};

enum class EmbedderKind { Hashing, Remote };

struct EmbedderConfig {
  EmbedderKind kind = EmbedderKind::Hashing;
  std::size_t dim = 64;
  // OpenAI-compatible embeddings URL, e.g. http://localhost:8080/v1/embeddings
  std::string endpoint;
  std::string model_name = "all-MiniLM-L6-v2";
  std::string api_key_env;
  int max_retries = 3;
  std::size_t batch_size = 256;
};

// Posts {"model", "input": [texts]} and reads data[i].embedding.
class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderConfig config);
  std::size_t dim() const override { return dim_.load(); }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

 private:
  std::vector<EmbeddingVector> request(std::span<const std::string> texts);

  EmbedderConfig config_;
  std::string api_key_;
  std::atomic<std::size_t> dim_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config);

}  // namespace kggen
