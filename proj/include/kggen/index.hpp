#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kggen {

class Embedder;

// Dense vector with finite entries.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  // Throws ValidationError on NaN or infinite entries.
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  bool is_zero() const;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

// Cosine similarity in [-1, 1]. A zero vector yields 0 (logged).
// Throws ValidationError when dimensions differ.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// Okapi BM25 of the query against every document:
//   sum over query tokens t (with repetition) of
//   idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl)),
//   idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)).
// Tokens come from text::tokenize.
std::vector<double> bm25_scores(std::string_view query, std::span<const std::string> corpus,
                                Bm25Params params = {});

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<std::vector<double>> centroids;
  // Within-cluster sum of squares after each centroid update.
  std::vector<double> wcss_history;
  int iterations = 0;
};

// max(1, ceil(n / target)), capped at n.
std::size_t kmeans_cluster_count(std::size_t n, std::size_t target);

// Lloyd's algorithm with k-means++ seeding. Stops at an assignment fixpoint or
// after max_iterations. An empty cluster takes the point farthest from its
// centroid in the currently largest cluster.
KMeansResult kmeans(std::span<const EmbeddingVector> vectors, std::size_t cluster_size_target,
                    std::uint64_t seed, int max_iterations = 100);

struct ScoredCandidate {
  std::size_t index = 0;  // position in the item list
  std::string text;
  double bm25_raw = 0.0;
  double bm25_norm = 0.0;
  double cosine = 0.0;
  double fused = 0.0;
};

inline double fuse(double bm25_norm, double cosine) { return 0.5 * bm25_norm + 0.5 * cosine; }

// Fused score of every item against the query, in input order. BM25 is
// normalized by the maximum over `items`.
std::vector<ScoredCandidate> fused_scores(std::string_view query, const EmbeddingVector& query_vector,
                                          std::span<const std::string> items,
                                          std::span<const EmbeddingVector> item_vectors);

// Fused descending, then text, then index.
bool fused_before(const ScoredCandidate& a, const ScoredCandidate& b);

// Ranks items against the query by fuse(bm25 / max bm25, cosine), descending,
// ties by item text then position. Items byte-equal to the query are skipped.
// Returns at most k candidates.
std::vector<ScoredCandidate> fused_rank(std::string_view query, const EmbeddingVector& query_vector,
                                        std::span<const std::string> items,
                                        std::span<const EmbeddingVector> item_vectors, std::size_t k);

// Same, embedding query and items with the given embedder.
std::vector<ScoredCandidate> fused_topk(std::string_view query, std::span<const std::string> items,
                                        std::size_t k, Embedder& embedder);

}  // namespace kggen
