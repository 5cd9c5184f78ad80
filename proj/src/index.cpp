#include "kggen/index.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "kggen/embedder.hpp"
#include "kggen/errors.hpp"
#include "kggen/text.hpp"

namespace kggen {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw ValidationError("embedding has a non-finite entry");
  }
}

bool EmbeddingVector::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw ValidationError("cosine of vectors with dimensions " + std::to_string(a.dim()) + " and " +
                          std::to_string(b.dim()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    spdlog::warn("cosine: zero vector, similarity defined as 0");
    return 0.0;
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// BM25

std::vector<double> bm25_scores(std::string_view query, std::span<const std::string> corpus, Bm25Params params) {
  const std::size_t n = corpus.size();
  std::vector<double> scores(n, 0.0);
  if (n == 0) return scores;

  std::vector<std::map<std::string, int>> tf(n);
  std::vector<double> length(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto tokens = text::tokenize(corpus[i]);
    for (auto& t : tokens) ++tf[i][t];
    length[i] = static_cast<double>(tokens.size());
    total += length[i];
  }
  const double avgdl = total / static_cast<double>(n);
  if (avgdl == 0.0) return scores;

  std::map<std::string, int> df;
  for (const auto& doc : tf) {
    for (const auto& [term, count] : doc) ++df[term];
  }

  for (const auto& q : text::tokenize(query)) {
    auto it = df.find(q);
    if (it == df.end()) continue;
    const double d = static_cast<double>(it->second);
    const double idf = std::log(1.0 + (static_cast<double>(n) - d + 0.5) / (d + 0.5));
    for (std::size_t i = 0; i < n; ++i) {
      auto f = tf[i].find(q);
      if (f == tf[i].end()) continue;
      const double freq = static_cast<double>(f->second);
      const double norm = params.k1 * (1.0 - params.b + params.b * length[i] / avgdl);
      scores[i] += idf * freq * (params.k1 + 1.0) / (freq + norm);
    }
  }
  return scores;
}

// ---------------------------------------------------------------------------
// k-means

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Uniform in [0, 1) from the top 53 bits; identical on every platform.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t nearest(std::span<const double> point, const std::vector<std::vector<double>>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    double d = squared_distance(point, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

std::size_t kmeans_cluster_count(std::size_t n, std::size_t target) {
  if (target == 0) throw ValidationError("k-means cluster size target must be positive");
  if (n == 0) return 0;
  return std::min(n, std::max<std::size_t>(1, (n + target - 1) / target));
}

KMeansResult kmeans(std::span<const EmbeddingVector> vectors, std::size_t cluster_size_target, std::uint64_t seed,
                    int max_iterations) {
  const std::size_t n = vectors.size();
  if (n == 0) throw ValidationError("k-means needs at least one vector");
  const std::size_t dim = vectors[0].dim();
  for (const auto& v : vectors) {
    if (v.dim() != dim) throw ValidationError("k-means input vectors differ in dimension");
  }
  const std::size_t k = kmeans_cluster_count(n, cluster_size_target);

  // k-means++ seeding.
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centroids;
  std::vector<bool> chosen(n, false);
  std::size_t first = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
  centroids.emplace_back(vectors[first].values().begin(), vectors[first].values().end());
  chosen[first] = true;
  std::vector<double> d2(n);
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = squared_distance(vectors[i].values(), centroids[nearest(vectors[i].values(), centroids)]);
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double r = uniform01(rng) * total;
      double cumulative = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        cumulative += d2[i];
        pick = i;
        if (cumulative > r) break;
      }
    } else {
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        if (!chosen[i]) pick = i;
      }
    }
    chosen[pick] = true;
    centroids.emplace_back(vectors[pick].values().begin(), vectors[pick].values().end());
  }

  KMeansResult result;
  std::vector<std::size_t> assignment;
  for (int iter = 0; iter < max_iterations; ++iter) {
    std::vector<std::size_t> next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = nearest(vectors[i].values(), centroids);
    if (iter > 0 && next == assignment) break;
    assignment = std::move(next);

    std::vector<std::size_t> counts(k, 0);
    for (auto c : assignment) ++counts[c];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t largest = static_cast<std::size_t>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      std::size_t farthest = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assignment[i] != largest) continue;
        double d = squared_distance(vectors[i].values(), centroids[largest]);
        if (d > far_d) {
          far_d = d;
          farthest = i;
        }
      }
      assignment[farthest] = c;
      --counts[largest];
      ++counts[c];
      centroids[c].assign(vectors[farthest].values().begin(), vectors[farthest].values().end());
    }

    for (auto& centroid : centroids) std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& centroid = centroids[assignment[i]];
      for (std::size_t j = 0; j < dim; ++j) centroid[j] += vectors[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (auto& v : centroids[c]) v /= static_cast<double>(counts[c]);
    }
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) wcss += squared_distance(vectors[i].values(), centroids[assignment[i]]);
    result.wcss_history.push_back(wcss);
    result.iterations = iter + 1;
  }
  result.assignment = std::move(assignment);
  result.centroids = std::move(centroids);
  return result;
}

// ---------------------------------------------------------------------------
// Fused retrieval

std::vector<ScoredCandidate> fused_scores(std::string_view query, const EmbeddingVector& query_vector,
                                          std::span<const std::string> items,
                                          std::span<const EmbeddingVector> item_vectors) {
  if (items.size() != item_vectors.size()) throw ValidationError("fused scoring: one vector per item required");
  if (items.empty()) return {};
  auto raw = bm25_scores(query, items);
  const double max_raw = *std::max_element(raw.begin(), raw.end());
  std::vector<ScoredCandidate> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    ScoredCandidate c;
    c.index = i;
    c.text = items[i];
    c.bm25_raw = raw[i];
    c.bm25_norm = max_raw > 0.0 ? raw[i] / max_raw : 0.0;
    c.cosine = cosine(query_vector, item_vectors[i]);
    c.fused = fuse(c.bm25_norm, c.cosine);
    out.push_back(std::move(c));
  }
  return out;
}

bool fused_before(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.fused != b.fused) return a.fused > b.fused;
  if (a.text != b.text) return a.text < b.text;
  return a.index < b.index;
}

std::vector<ScoredCandidate> fused_rank(std::string_view query, const EmbeddingVector& query_vector,
                                        std::span<const std::string> items,
                                        std::span<const EmbeddingVector> item_vectors, std::size_t k) {
  if (items.size() != item_vectors.size()) throw ValidationError("fused_rank: one vector per item required");
  if (k == 0) throw ValidationError("fused_rank: k must be at least 1");

  std::vector<std::size_t> keep;
  std::vector<std::string> corpus;
  std::vector<EmbeddingVector> vectors;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i] == query) continue;
    keep.push_back(i);
    corpus.push_back(items[i]);
    vectors.push_back(item_vectors[i]);
  }
  auto out = fused_scores(query, query_vector, corpus, vectors);
  for (auto& c : out) c.index = keep[c.index];
  std::sort(out.begin(), out.end(), fused_before);
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<ScoredCandidate> fused_topk(std::string_view query, std::span<const std::string> items, std::size_t k,
                                        Embedder& embedder) {
  if (items.empty()) throw ValidationError("fused_topk: item list is empty");
  std::vector<std::string> texts(items.begin(), items.end());
  texts.emplace_back(query);
  auto vectors = embed(texts, embedder);
  EmbeddingVector query_vector = std::move(vectors.back());
  vectors.pop_back();
  return fused_rank(query, query_vector, items, vectors, k);
}

}  // namespace kggen
