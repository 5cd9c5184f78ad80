#include "kggen/bench.hpp"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <thread>

#include "kggen/errors.hpp"
#include "kggen/text.hpp"

namespace kggen {

using nlohmann::json;

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// failure by index.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(std::max(jobs, 1), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Undirected hop distance from the seeds, up to max_hops. Unreached nodes are absent.
std::map<std::string, int> hop_distances(const std::vector<Edge>& edges, const std::set<std::string>& seeds,
                                         int max_hops) {
  std::map<std::string, std::set<std::string>> adjacent;
  for (const auto& e : edges) {
    adjacent[e.subject].insert(e.object);
    adjacent[e.object].insert(e.subject);
  }
  std::map<std::string, int> dist;
  std::queue<std::string> frontier;
  for (const auto& s : seeds) {
    dist[s] = 0;
    frontier.push(s);
  }
  while (!frontier.empty()) {
    std::string node = frontier.front();
    frontier.pop();
    const int d = dist[node];
    if (d == max_hops) continue;
    for (const auto& next : adjacent[node]) {
      if (dist.emplace(next, d + 1).second) frontier.push(next);
    }
  }
  return dist;
}

std::string format_score(double v) { return fmt::format("{:.4f}", v); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

// ---------------------------------------------------------------------------
// Fixtures

void ArticleFixture::validate() const {
  if (facts.size() != kFactsPerArticle) {
    throw ValidationError("article \"" + id + "\" has " + std::to_string(facts.size()) + " facts, expected 15");
  }
  for (const auto& f : facts) {
    if (text::trim(f).empty()) throw ValidationError("article \"" + id + "\" has an empty fact");
  }
}

ArticleFixture fixture_from_json(const json& j) {
  ArticleFixture a;
  try {
    a.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    a.title = j.value("title", "");
    a.text = j.value("text", "");
    a.facts = j.at("facts").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed article fixture: ") + e.what(), std::string::npos);
  }
  a.validate();
  return a;
}

ArticleFixture read_fixture(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), e.byte);
  }
  return fixture_from_json(j);
}

void BenchParams::validate() const {
  if (node_top_k < 1) throw ValidationError("node_top_k must be >= 1");
  if (triple_top_k < 1) throw ValidationError("triple_top_k must be >= 1");
}

std::vector<std::string> extract_article_facts(const ArticleFixture& article, ModelGateway& gateway) {
  if (text::trim(article.text).empty()) throw ValidationError("article \"" + article.id + "\" has no text");
  auto facts = gateway.extract_facts(article.text);
  std::set<std::string> seen;
  for (const auto& f : facts) {
    if (!seen.insert(f).second) spdlog::warn("article {}: duplicate fact \"{}\"", article.id, f);
  }
  return facts;
}

// ---------------------------------------------------------------------------
// MINE-1

FactRetriever::FactRetriever(const KnowledgeGraph& graph, Embedder& embedder)
    : embedder_(embedder), labels_(graph.entities().begin(), graph.entities().end()) {
  const auto edges = graph.edges();
  edges_.assign(edges.begin(), edges.end());
  if (!labels_.empty()) vectors_ = embed(labels_, embedder_);
}

Subgraph FactRetriever::retrieve(const std::string& fact, const BenchParams& params) const {
  params.validate();
  if (labels_.empty()) {
    spdlog::warn("fact retrieval on an empty graph");
    return {};
  }
  const std::vector<std::string> query{fact};
  const EmbeddingVector q = embed(query, embedder_).front();

  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) ranked.emplace_back(cosine(q, vectors_[i]), i);
  // labels_ is sorted, so index order is label order.
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::set<std::string> seeds;
  for (std::size_t i = 0; i < std::min(params.node_top_k, ranked.size()); ++i) {
    seeds.insert(labels_[ranked[i].second]);
  }

  const auto dist = hop_distances(edges_, seeds, BenchParams::hop_radius);
  Subgraph out;
  for (const auto& [node, d] : dist) out.nodes.push_back(node);
  for (const auto& e : edges_) {
    if (dist.count(e.subject) && dist.count(e.object)) out.triples.push_back(e);
  }
  return out;
}

Subgraph retrieve_for_fact(const KnowledgeGraph& graph, const std::string& fact, const BenchParams& params,
                           Embedder& embedder) {
  return FactRetriever(graph, embedder).retrieve(fact, params);
}

std::string render_subgraph(const Subgraph& subgraph) {
  std::string out = "Nodes:\n";
  for (const auto& n : subgraph.nodes) out += n + "\n";
  out += "Relations:\n";
  for (const auto& e : subgraph.triples) out += e.subject + " — " + e.predicate + " — " + e.object + "\n";
  return out;
}

double mine1_percentage(const std::vector<bool>& verdicts) {
  if (verdicts.size() != kFactsPerArticle) throw ValidationError("MINE-1 needs exactly 15 verdicts");
  const auto ones = std::count(verdicts.begin(), verdicts.end(), true);
  return 100.0 * static_cast<double>(ones) / static_cast<double>(kFactsPerArticle);
}

namespace {

ArticleReport score_article(const FactRetriever& retriever, const ArticleFixture& fixture, const BenchParams& params,
                            ModelGateway& gateway) {
  fixture.validate();
  ArticleReport report;
  report.id = fixture.id;
  for (const auto& fact : fixture.facts) {
    Subgraph sg = retriever.retrieve(fact, params);
    // Nothing retrieved: nothing can be inferred, no judge call needed.
    report.verdicts.push_back(sg.nodes.empty() ? false : gateway.judge_fact(fact, render_subgraph(sg)));
  }
  report.score = mine1_percentage(report.verdicts);
  return report;
}

}  // namespace

ArticleReport mine1_score(const KnowledgeGraph& graph, const ArticleFixture& fixture, const BenchParams& params,
                          ModelGateway& gateway, Embedder& embedder) {
  return score_article(FactRetriever(graph, embedder), fixture, params, gateway);
}

EvalReport mine1_evaluate(const std::vector<ArticleRun>& runs, const BenchParams& params, ModelGateway& gateway,
                          Embedder& embedder) {
  params.validate();
  EvalReport report;
  report.node_top_k = params.node_top_k;
  report.articles.resize(runs.size());
  parallel_for(runs.size(), params.jobs, [&](std::size_t i) {
    report.articles[i] = score_article(FactRetriever(runs[i].graph, embedder), runs[i].fixture, params, gateway);
  });
  std::stable_sort(report.articles.begin(), report.articles.end(),
                   [](const ArticleReport& a, const ArticleReport& b) { return a.id < b.id; });
  double sum = 0.0;
  for (const auto& a : report.articles) sum += a.score;
  report.mean = report.articles.empty() ? 0.0 : sum / static_cast<double>(report.articles.size());
  return report;
}

json EvalReport::to_json() const {
  json articles_json = json::array();
  std::vector<double> scores;
  for (const auto& a : articles) {
    articles_json.push_back({{"id", a.id}, {"score", a.score}, {"verdicts", a.verdicts}});
    scores.push_back(a.score);
  }
  json histogram = json::array();
  for (const auto& b : score_histogram(scores)) {
    histogram.push_back({{"lower", b.lower}, {"upper", b.upper}, {"count", b.count}});
  }
  return {{"format", "kggen-mine1-report"}, {"version", kFormatVersion}, {"node_top_k", node_top_k},
          {"articles", articles_json},      {"mean", mean},                {"histogram", histogram}};
}

std::string EvalReport::to_csv() const {
  std::string out = "article_id,score";
  for (std::size_t i = 1; i <= kFactsPerArticle; ++i) out += ",fact_" + std::to_string(i);
  out += "\n";
  for (const auto& a : articles) {
    out += csv_field(a.id) + "," + format_score(a.score);
    for (bool v : a.verdicts) out += v ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// MINE-2

std::string render_triples(const std::vector<RetrievedTriple>& triples) {
  std::string out;
  for (const auto& t : triples) out += "(" + t.edge.subject + ", " + t.edge.predicate + ", " + t.edge.object + ")\n";
  return out;
}

TripleIndex::TripleIndex(const KnowledgeGraph& graph, Embedder& embedder) : embedder_(embedder), graph_(graph) {
  if (!graph.has_full_provenance()) {
    throw ConfigError("RAG evaluation needs a graph whose triples all carry source chunks");
  }
  const auto edges = graph.edges();
  edges_.assign(edges.begin(), edges.end());
  for (const auto& e : edges_) texts_.push_back(e.subject + " " + e.predicate + " " + e.object);
  vectors_ = embed(texts_, embedder_);
}

Mine2Context TripleIndex::retrieve(const std::string& question, const BenchParams& params) const {
  params.validate();
  const std::vector<std::string> query{question};
  const EmbeddingVector q = embed(query, embedder_).front();
  auto scored = fused_scores(question, q, texts_, vectors_);
  std::sort(scored.begin(), scored.end(), fused_before);

  Mine2Context ctx;
  const std::size_t top = std::min(params.triple_top_k, scored.size());
  std::set<std::string> seeds;
  std::vector<bool> taken(edges_.size(), false);
  for (std::size_t i = 0; i < top; ++i) {
    const auto& c = scored[i];
    ctx.triples.push_back({edges_[c.index], c.text, c.fused, 0});
    taken[c.index] = true;
    seeds.insert(edges_[c.index].subject);
    seeds.insert(edges_[c.index].object);
  }

  // A triple touching a seed is one hop out; one touching a neighbour of a seed is two.
  const auto dist = hop_distances(edges_, seeds, BenchParams::hop_radius - 1);
  std::vector<RetrievedTriple> extra;
  for (const auto& c : scored) {
    if (taken[c.index]) continue;
    const Edge& e = edges_[c.index];
    int best = BenchParams::hop_radius + 1;
    if (auto it = dist.find(e.subject); it != dist.end()) best = std::min(best, it->second);
    if (auto it = dist.find(e.object); it != dist.end()) best = std::min(best, it->second);
    const int hop = best + 1;
    if (hop <= BenchParams::hop_radius) extra.push_back({e, c.text, c.fused, hop});
  }
  std::stable_sort(extra.begin(), extra.end(), [](const RetrievedTriple& a, const RetrievedTriple& b) {
    if (a.hop != b.hop) return a.hop < b.hop;
    if (a.fused != b.fused) return a.fused > b.fused;
    return a.text < b.text;
  });
  if (extra.size() > params.expansion_count) extra.resize(params.expansion_count);
  ctx.triples.insert(ctx.triples.end(), extra.begin(), extra.end());

  std::map<Edge, std::set<std::string>> chunks_of;
  for (const auto& t : graph_.triples()) chunks_of[edge_of(t)].insert(*t.chunk);
  std::set<std::string> seen;
  for (const auto& t : ctx.triples) {
    for (const auto& id : chunks_of[t.edge]) {
      if (!seen.insert(id).second) continue;
      ctx.chunk_ids.push_back(id);
      ctx.chunk_texts.push_back(graph_.chunks().at(id));
    }
  }
  return ctx;
}

Mine2Context mine2_retrieve(const KnowledgeGraph& graph, const std::string& question, const BenchParams& params,
                            Embedder& embedder) {
  return TripleIndex(graph, embedder).retrieve(question, params);
}

std::vector<QaPair> read_qa_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::vector<QaPair> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (text::trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      out.push_back({j.at("question").get<std::string>(), j.at("answer").get<std::string>()});
    } catch (const json::parse_error& e) {
      throw ParseError(path + ": " + e.what(), line_start + e.byte);
    } catch (const json::exception& e) {
      throw ParseError(path + ": each line needs string \"question\" and \"answer\"", line_start);
    }
  }
  return out;
}

Mine2Report mine2_eval(const KnowledgeGraph& graph, const std::vector<QaPair>& qa, const BenchParams& params,
                       ModelGateway& gateway, Embedder& embedder) {
  if (qa.empty()) throw ValidationError("no questions to evaluate");
  params.validate();
  const TripleIndex index(graph, embedder);
  Mine2Report report;
  report.results.resize(qa.size());
  parallel_for(qa.size(), params.jobs, [&](std::size_t i) {
    const Mine2Context ctx = index.retrieve(qa[i].question, params);
    std::string text_block;
    for (std::size_t c = 0; c < ctx.chunk_texts.size(); ++c) {
      if (c) text_block += "\n\n";
      text_block += ctx.chunk_texts[c];
    }
    QaResult& r = report.results[i];
    r.question = qa[i].question;
    r.expected = qa[i].answer;
    r.response = gateway.answer_question(qa[i].question, render_triples(ctx.triples), text_block);
    r.correct = gateway.judge_answer(qa[i].question, qa[i].answer, r.response);
  });
  const auto yes = std::count_if(report.results.begin(), report.results.end(),
                                 [](const QaResult& r) { return r.correct; });
  report.accuracy = 100.0 * static_cast<double>(yes) / static_cast<double>(qa.size());
  return report;
}

json Mine2Report::to_json() const {
  json rows = json::array();
  for (const auto& r : results) {
    rows.push_back({{"question", r.question}, {"expected", r.expected}, {"response", r.response},
                    {"correct", r.correct}});
  }
  return {{"format", "kggen-mine2-report"}, {"version", kFormatVersion}, {"results", rows}, {"accuracy", accuracy}};
}

std::string Mine2Report::to_csv() const {
  std::string out = "question,expected,correct\n";
  for (const auto& r : results) out += csv_field(r.question) + "," + csv_field(r.expected) + (r.correct ? ",1\n" : ",0\n");
  return out;
}

// ---------------------------------------------------------------------------
// Histogram

std::vector<HistogramBucket> score_histogram(const std::vector<double>& scores) {
  std::map<int, std::size_t> counts;
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 100.0)) throw ValidationError("score outside [0, 100]");
    const int bucket = std::min(9, static_cast<int>(std::floor(s / 10.0)));
    ++counts[bucket];
  }
  std::vector<HistogramBucket> out;
  for (const auto& [b, n] : counts) out.push_back({b * 10, b * 10 + 10, n});
  return out;
}

std::string histogram_csv(const std::vector<HistogramBucket>& buckets) {
  std::string out = "lower,upper,count\n";
  for (const auto& b : buckets) out += fmt::format("{},{},{}\n", b.lower, b.upper, b.count);
  return out;
}

}  // namespace kggen
