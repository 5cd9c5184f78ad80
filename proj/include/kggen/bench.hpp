#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "kggen/embedder.hpp"
#include "kggen/graph.hpp"
#include "kggen/model.hpp"

namespace kggen {

inline constexpr std::size_t kFactsPerArticle = 15;

struct ArticleFixture {
  std::string id;
  std::string title;
  std::string text;
  std::vector<std::string> facts;

  // Throws ValidationError unless there are exactly 15 non-empty facts.
  void validate() const;
};

ArticleFixture fixture_from_json(const nlohmann::json& j);
ArticleFixture read_fixture(const std::string& path);

struct BenchParams {
  std::size_t node_top_k = 5;
  static constexpr int hop_radius = 2;
  std::size_t triple_top_k = 10;
  std::size_t expansion_count = 10;
  int jobs = 1;

  void validate() const;
};

// Model-side fact extraction for building fixtures. Duplicates are logged.
std::vector<std::string> extract_article_facts(const ArticleFixture& article, ModelGateway& gateway);

struct Subgraph {
  std::vector<std::string> nodes;  // sorted
  std::vector<Edge> triples;       // sorted, distinct
};

// Embeds the entity labels once; retrieve() can then be called per fact.
class FactRetriever {
 public:
  FactRetriever(const KnowledgeGraph& graph, Embedder& embedder);
  // Top node_top_k entities by cosine to the fact (ties by label), expanded
  // over undirected edges to radius 2, with every triple inside that set.
  Subgraph retrieve(const std::string& fact, const BenchParams& params) const;

 private:
  Embedder& embedder_;
  std::vector<std::string> labels_;
  std::vector<EmbeddingVector> vectors_;
  std::vector<Edge> edges_;
};

Subgraph retrieve_for_fact(const KnowledgeGraph& graph, const std::string& fact, const BenchParams& params,
                           Embedder& embedder);

// "Nodes:" then one label per line, then "Relations:" then "s — p — o" lines.
std::string render_subgraph(const Subgraph& subgraph);

struct ArticleReport {
  std::string id;
  std::vector<bool> verdicts;
  double score = 0.0;
};

// 100 * ones / 15.
double mine1_percentage(const std::vector<bool>& verdicts);

ArticleReport mine1_score(const KnowledgeGraph& graph, const ArticleFixture& fixture, const BenchParams& params,
                          ModelGateway& gateway, Embedder& embedder);

struct EvalReport {
  std::vector<ArticleReport> articles;  // ordered by article id
  double mean = 0.0;
  std::size_t node_top_k = 0;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

struct ArticleRun {
  ArticleFixture fixture;
  KnowledgeGraph graph;
};

// Articles are scored concurrently (params.jobs).
EvalReport mine1_evaluate(const std::vector<ArticleRun>& runs, const BenchParams& params, ModelGateway& gateway,
                          Embedder& embedder);

struct RetrievedTriple {
  Edge edge;
  std::string text;  // "s p o"
  double fused = 0.0;
  int hop = 0;  // 0 for the top-scored triples
};

struct Mine2Context {
  std::vector<RetrievedTriple> triples;
  std::vector<std::string> chunk_ids;  // selection order, deduplicated
  std::vector<std::string> chunk_texts;
};

// One line per triple: "(s, p, o)".
std::string render_triples(const std::vector<RetrievedTriple>& triples);

class TripleIndex {
 public:
  // Throws ConfigError unless every triple carries a known chunk.
  TripleIndex(const KnowledgeGraph& graph, Embedder& embedder);
  // Top triple_top_k triples by fused score, then up to expansion_count more
  // within two hops of their endpoints ordered by hop, fused score, text.
  Mine2Context retrieve(const std::string& question, const BenchParams& params) const;

 private:
  Embedder& embedder_;
  const KnowledgeGraph& graph_;
  std::vector<Edge> edges_;
  std::vector<std::string> texts_;
  std::vector<EmbeddingVector> vectors_;
};

Mine2Context mine2_retrieve(const KnowledgeGraph& graph, const std::string& question, const BenchParams& params,
                            Embedder& embedder);

struct QaPair {
  std::string question;
  std::string answer;
};

// JSON lines of {"question", "answer"}.
std::vector<QaPair> read_qa_pairs(const std::string& path);

struct QaResult {
  std::string question;
  std::string expected;
  std::string response;
  bool correct = false;
};

struct Mine2Report {
  std::vector<QaResult> results;
  double accuracy = 0.0;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Throws ValidationError on an empty question list.
Mine2Report mine2_eval(const KnowledgeGraph& graph, const std::vector<QaPair>& qa, const BenchParams& params,
                       ModelGateway& gateway, Embedder& embedder);

struct HistogramBucket {
  int lower = 0;  // inclusive
  int upper = 0;  // exclusive, except the last bucket which includes 100
  std::size_t count = 0;
  bool operator==(const HistogramBucket&) const = default;
};

// 10-point buckets; only non-empty buckets are returned.
std::vector<HistogramBucket> score_histogram(const std::vector<double>& scores);
std::string histogram_csv(const std::vector<HistogramBucket>& buckets);

}  // namespace kggen
