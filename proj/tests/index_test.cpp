#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kggen/embedder.hpp"
#include "kggen/errors.hpp"
#include "kggen/index.hpp"
#include "support.hpp"

using namespace kggen;
using namespace kggen::testing;

namespace {

std::string random_doc(std::mt19937_64& rng, int max_tokens) {
  int n = static_cast<int>(rng() % static_cast<std::uint64_t>(max_tokens + 1));
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + random_word(rng, 6);
  return s;
}

// Two tight, well separated groups of points.
std::vector<EmbeddingVector> two_blobs(std::mt19937_64& rng, std::size_t per_blob) {
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<EmbeddingVector> v;
  for (std::size_t i = 0; i < 2 * per_blob; ++i) {
    double cx = i < per_blob ? 0.0 : 10.0;
    v.emplace_back(std::vector<double>{cx + noise(rng), cx + noise(rng), noise(rng)});
  }
  return v;
}

}  // namespace

TEST(Cosine, Basics) {
  EmbeddingVector a({1, 0}), b({0, 2}), c({3, 0}), z({0, 0});
  EXPECT_DOUBLE_EQ(cosine(a, b), 0.0);
  EXPECT_DOUBLE_EQ(cosine(a, c), 1.0);
  EXPECT_DOUBLE_EQ(cosine(a, z), 0.0);
  EXPECT_THROW(cosine(a, EmbeddingVector({1, 2, 3})), ValidationError);
  EXPECT_THROW(EmbeddingVector({std::nan("")}), ValidationError);
}

TEST(Bm25, MatchesOracleOnRandomCorpora) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> docs;
    int n = 1 + static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) docs.push_back(random_doc(rng, 12));
    std::string query = random_doc(rng, 4);
    auto got = bm25_scores(query, docs);
    auto want = bm25_oracle(query, docs);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9) << trial;
  }
}

TEST(Bm25, EdgeCases) {
  std::vector<std::string> empty_docs{"", ""};
  EXPECT_EQ(bm25_scores("a", empty_docs), (std::vector<double>{0, 0}));
  std::vector<std::string> docs{"a b", "c"};
  EXPECT_EQ(bm25_scores("zzz", docs), (std::vector<double>{0, 0}));
  EXPECT_GT(bm25_scores("a", docs)[0], 0.0);
  EXPECT_TRUE(bm25_scores("a", std::vector<std::string>{}).empty());
}

TEST(Fused, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(12);
  HashingEmbedder embedder(16);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> items;
    int n = 1 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) items.push_back(random_phrase(rng, 3, 6));
    std::string query = rng() % 4 == 0 ? items[rng() % items.size()] : random_phrase(rng, 3, 6);
    std::size_t k = 1 + rng() % 20;
    auto got = fused_topk(query, items, k, embedder);
    auto vecs = embedder.embed_batch(items);
    auto qv = embedder.embed_batch(std::vector<std::string>{query}).front();
    auto want = fused_oracle(query, qv, items, vecs, true);
    if (want.size() > k) want.resize(k);
    ASSERT_EQ(got.size(), want.size()) << trial;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].index, want[i].index) << trial << " rank " << i;
      EXPECT_EQ(got[i].fused, want[i].fused);
    }
  }
}

TEST(Fused, SkipsQueryAndBreaksTiesByText) {
  std::vector<std::string> items{"b", "a", "query", "a"};
  std::vector<EmbeddingVector> vecs(4, EmbeddingVector({1.0, 0.0}));
  auto r = fused_rank("query", EmbeddingVector({1.0, 0.0}), items, vecs, 10);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].index, 1u);
  EXPECT_EQ(r[1].index, 3u);
  EXPECT_EQ(r[2].index, 0u);
  EXPECT_EQ(fuse(1.0, 0.5), 0.75);
}

TEST(Fused, ScoresKeepEqualItems) {
  std::vector<std::string> items{"a b", "c"};
  std::vector<EmbeddingVector> vecs{EmbeddingVector({1.0}), EmbeddingVector({1.0})};
  auto s = fused_scores("a b", EmbeddingVector({1.0}), items, vecs);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0].fused, 1.0);
  EXPECT_DOUBLE_EQ(s[1].fused, 0.5);
}

TEST(KMeans, ClusterCount) {
  EXPECT_EQ(kmeans_cluster_count(1000, 128), 8u);
  EXPECT_EQ(kmeans_cluster_count(128, 128), 1u);
  EXPECT_EQ(kmeans_cluster_count(129, 128), 2u);
  EXPECT_EQ(kmeans_cluster_count(3, 1), 3u);
  EXPECT_EQ(kmeans_cluster_count(0, 128), 0u);
  EXPECT_THROW(kmeans_cluster_count(5, 0), ValidationError);
}

TEST(KMeans, DefaultsGiveCeilNOver128Clusters) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (std::size_t n : {1u, 127u, 128u, 129u, 300u, 700u}) {
    std::vector<EmbeddingVector> v;
    for (std::size_t i = 0; i < n; ++i) v.emplace_back(std::vector<double>{g(rng), g(rng), g(rng), g(rng)});
    auto r = kmeans(v, 128, 42);
    std::set<std::size_t> used(r.assignment.begin(), r.assignment.end());
    EXPECT_EQ(used.size(), (n + 127) / 128) << n;
    EXPECT_EQ(r.centroids.size(), (n + 127) / 128);
  }
}

TEST(KMeans, WcssNonIncreasingAndAssignmentsNearest) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<EmbeddingVector> v;
    std::size_t n = 20 + rng() % 200;
    for (std::size_t i = 0; i < n; ++i) v.emplace_back(std::vector<double>{g(rng), g(rng), g(rng)});
    auto r = kmeans(v, 16, trial);
    for (std::size_t i = 1; i < r.wcss_history.size(); ++i) {
      EXPECT_LE(r.wcss_history[i], r.wcss_history[i - 1] + 1e-9) << trial;
    }
    if (r.iterations < 100) {
      // At a fixpoint every point sits with its nearest centroid.
      for (std::size_t i = 0; i < n; ++i) {
        double own = 0, best = 1e300;
        for (std::size_t c = 0; c < r.centroids.size(); ++c) {
          double d = 0;
          for (std::size_t j = 0; j < 3; ++j) d += (v[i][j] - r.centroids[c][j]) * (v[i][j] - r.centroids[c][j]);
          best = std::min(best, d);
          if (c == r.assignment[i]) own = d;
        }
        EXPECT_LE(own, best + 1e-12);
      }
    }
  }
}

TEST(KMeans, TwoBlobsArePure) {
  std::mt19937_64 rng(5);
  auto v = two_blobs(rng, 40);
  auto r = kmeans(v, 40, 9);
  ASSERT_EQ(r.centroids.size(), 2u);
  for (std::size_t i = 1; i < 40; ++i) EXPECT_EQ(r.assignment[i], r.assignment[0]);
  for (std::size_t i = 41; i < 80; ++i) EXPECT_EQ(r.assignment[i], r.assignment[40]);
  EXPECT_NE(r.assignment[0], r.assignment[40]);
}

TEST(KMeans, SeedDeterminism) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  std::vector<EmbeddingVector> v;
  for (int i = 0; i < 150; ++i) v.emplace_back(std::vector<double>{g(rng), g(rng)});
  auto a = kmeans(v, 20, 1234);
  auto b = kmeans(v, 20, 1234);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.wcss_history, b.wcss_history);
}

TEST(KMeans, IdenticalPointsStillFillEveryCluster) {
  std::vector<EmbeddingVector> v(10, EmbeddingVector({1.0, 1.0}));
  auto r = kmeans(v, 3, 1);
  std::set<std::size_t> used(r.assignment.begin(), r.assignment.end());
  EXPECT_EQ(used.size(), 4u);
}

TEST(HashingEmbedderTest, DeterministicAndNormalized) {
  HashingEmbedder e(32);
  std::vector<std::string> t{"winter olympics", "Olympics, winter!", ""};
  auto v = e.embed_batch(t);
  EXPECT_EQ(v[0], v[1]);
  EXPECT_NEAR(cosine(v[0], v[1]), 1.0, 1e-12);
  EXPECT_TRUE(v[2].is_zero());
  EXPECT_THROW(HashingEmbedder(0), ConfigError);
}
