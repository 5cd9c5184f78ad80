#pragma once

// Brute-force reference implementations and random input generators shared by
// the unit tests and the acceptance runner. Oracles avoid the library's own
// retrieval code paths: they split on spaces, sort everything, and compute
// hop distances with Floyd-Warshall.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "kggen/bench.hpp"
#include "kggen/embedder.hpp"
#include "kggen/extractor.hpp"
#include "kggen/graph.hpp"
#include "kggen/index.hpp"
#include "kggen/resolver.hpp"

namespace kggen::testing {

inline std::vector<std::string> split_spaces(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

// Okapi BM25 straight from the closed form, for space-separated lowercase
// ASCII text. Query terms are summed in query order.
inline std::vector<double> bm25_oracle(const std::string& query, const std::vector<std::string>& docs,
                                       double k1 = 1.2, double b = 0.75) {
  const double n = static_cast<double>(docs.size());
  std::vector<std::vector<std::string>> toks;
  double total = 0;
  for (const auto& d : docs) {
    toks.push_back(split_spaces(d));
    total += static_cast<double>(toks.back().size());
  }
  std::vector<double> out(docs.size(), 0.0);
  if (docs.empty() || total == 0) return out;
  const double avgdl = total / n;
  for (const auto& q : split_spaces(query)) {
    double df = 0;
    for (const auto& t : toks) df += std::count(t.begin(), t.end(), q) > 0 ? 1 : 0;
    if (df == 0) continue;
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const double f = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), q));
      if (f == 0) continue;
      const double len = static_cast<double>(toks[i].size());
      out[i] += idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len / avgdl));
    }
  }
  return out;
}

inline double cosine_oracle(const EmbeddingVector& a, const EmbeddingVector& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

struct OracleScore {
  std::size_t index;
  std::string text;
  double fused;
};

// Scores every item (optionally skipping byte-equal ones), then sorts the
// full list by (fused desc, text asc, index asc).
inline std::vector<OracleScore> fused_oracle(const std::string& query, const EmbeddingVector& qv,
                                             const std::vector<std::string>& items,
                                             const std::vector<EmbeddingVector>& vecs, bool skip_equal) {
  std::vector<std::size_t> keep;
  std::vector<std::string> docs;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (skip_equal && items[i] == query) continue;
    keep.push_back(i);
    docs.push_back(items[i]);
  }
  auto raw = bm25_oracle(query, docs);
  double mx = 0;
  for (double r : raw) mx = std::max(mx, r);
  std::vector<OracleScore> out;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    double norm = mx > 0 ? raw[j] / mx : 0.0;
    out.push_back({keep[j], items[keep[j]], 0.5 * norm + 0.5 * cosine_oracle(qv, vecs[keep[j]])});
  }
  std::sort(out.begin(), out.end(), [](const OracleScore& a, const OracleScore& b) {
    return std::tie(b.fused, a.text, a.index) < std::tie(a.fused, b.text, b.index);
  });
  return out;
}

// All-pairs undirected hop distances; unreachable pairs are "infinite".
inline std::map<std::string, std::map<std::string, int>> hop_matrix(const std::set<std::string>& nodes,
                                                                    const std::set<Edge>& edges) {
  const int inf = std::numeric_limits<int>::max() / 4;
  std::map<std::string, std::map<std::string, int>> d;
  for (const auto& a : nodes) {
    for (const auto& b : nodes) d[a][b] = a == b ? 0 : inf;
  }
  for (const auto& e : edges) {
    if (e.subject != e.object) d[e.subject][e.object] = d[e.object][e.subject] = 1;
  }
  for (const auto& k : nodes) {
    for (const auto& i : nodes) {
      for (const auto& j : nodes) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    }
  }
  return d;
}

// Reference MINE-1 retrieval: full cosine sort, then every node within two
// hops of any seed, then every triple inside.
inline Subgraph retrieve_oracle(const KnowledgeGraph& g, const std::string& fact, std::size_t top_k,
                                Embedder& embedder) {
  std::vector<std::string> labels(g.entities().begin(), g.entities().end());
  if (labels.empty()) return {};
  auto vecs = embedder.embed_batch(labels);
  auto qv = embedder.embed_batch(std::vector<std::string>{fact}).front();
  std::vector<std::pair<double, std::string>> ranked;
  for (std::size_t i = 0; i < labels.size(); ++i) ranked.push_back({cosine_oracle(qv, vecs[i]), labels[i]});
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  std::set<std::string> seeds;
  for (std::size_t i = 0; i < std::min(top_k, ranked.size()); ++i) seeds.insert(ranked[i].second);

  const auto edges = g.edges();
  auto d = hop_matrix(g.entities(), edges);
  Subgraph out;
  for (const auto& n : g.entities()) {
    for (const auto& s : seeds) {
      if (d[s][n] <= 2) {
        out.nodes.push_back(n);
        break;
      }
    }
  }
  std::set<std::string> in(out.nodes.begin(), out.nodes.end());
  for (const auto& e : edges) {
    if (in.count(e.subject) && in.count(e.object)) out.triples.push_back(e);
  }
  return out;
}

// Reference MINE-2 retrieval. Returns the selected edges in order.
inline std::vector<Edge> mine2_oracle(const KnowledgeGraph& g, const std::string& question, Embedder& embedder,
                                      std::size_t top = 10, std::size_t extra = 10) {
  const auto edge_set = g.edges();
  std::vector<Edge> edges(edge_set.begin(), edge_set.end());
  std::vector<std::string> texts;
  for (const auto& e : edges) texts.push_back(e.subject + " " + e.predicate + " " + e.object);
  auto vecs = embedder.embed_batch(texts);
  auto qv = embedder.embed_batch(std::vector<std::string>{question}).front();
  auto scored = fused_oracle(question, qv, texts, vecs, false);

  std::vector<Edge> out;
  std::set<std::size_t> taken;
  std::set<std::string> seeds;
  for (std::size_t i = 0; i < std::min(top, scored.size()); ++i) {
    out.push_back(edges[scored[i].index]);
    taken.insert(scored[i].index);
    seeds.insert(edges[scored[i].index].subject);
    seeds.insert(edges[scored[i].index].object);
  }
  auto d = hop_matrix(g.entities(), edge_set);
  std::vector<std::tuple<int, double, std::string, std::size_t>> cand;
  for (const auto& s : scored) {
    if (taken.count(s.index)) continue;
    const Edge& e = edges[s.index];
    int best = std::numeric_limits<int>::max() / 4;
    for (const auto& seed : seeds) best = std::min({best, d[seed][e.subject], d[seed][e.object]});
    int hop = best + 1;
    if (hop <= 2) cand.emplace_back(hop, -s.fused, s.text, s.index);
  }
  std::sort(cand.begin(), cand.end());
  for (std::size_t i = 0; i < std::min(extra, cand.size()); ++i) out.push_back(edges[std::get<3>(cand[i])]);
  return out;
}

// ---------------------------------------------------------------------------
// Generators

inline std::string random_word(std::mt19937_64& rng, int vocab) {
  static const char* words[] = {"alpha", "beta", "gamma", "delta", "omega", "river", "stone", "north",
                                "light", "cloud", "apple", "tiger", "queen", "music", "ocean", "paper"};
  return words[rng() % static_cast<std::uint64_t>(std::min(vocab, 16))];
}

inline std::string random_phrase(std::mt19937_64& rng, int max_words, int vocab) {
  int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_words));
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + random_word(rng, vocab);
  return s;
}

// Graph with `nodes` single-token entities n0..n{k} and random triples.
inline KnowledgeGraph random_graph(std::mt19937_64& rng, int nodes, int triples, bool provenance) {
  KnowledgeGraph g;
  static const char* preds[] = {"likes", "owns", "knows", "visits", "near"};
  std::vector<std::string> names;
  for (int i = 0; i < nodes; ++i) {
    names.push_back(random_word(rng, 16) + " " + std::to_string(i));
    g.add_entity(names.back());
  }
  if (provenance) {
    for (int c = 0; c < 4; ++c) g.add_chunk("doc#" + std::to_string(c), "chunk text " + std::to_string(c));
  }
  for (int t = 0; t < triples; ++t) {
    const auto& s = names[rng() % names.size()];
    const auto& o = names[rng() % names.size()];
    std::optional<std::string> chunk;
    if (provenance) chunk = "doc#" + std::to_string(rng() % 4);
    g.add_triple({s, preds[rng() % 5], o, chunk});
  }
  return g;
}

// Small chunk graphs over labels that collide after normalization.
inline std::vector<ChunkGraph> random_chunk_graphs(std::mt19937_64& rng) {
  static const std::vector<std::string> labels = {"Oslo", "oslo", " OSLO ", "Norway", "norway", "Bergen",
                                                  "Caf\xC3\xA9", "Cafe\xCC\x81", "winter  Olympics", "a\tb"};
  static const std::vector<std::string> preds = {"is in", "Is In", "capital of", "near", "  near "};
  std::vector<ChunkGraph> out;
  int n = 1 + static_cast<int>(rng() % 5);
  for (int i = 0; i < n; ++i) {
    ChunkGraph g;
    g.chunk_id = "d#" + std::to_string(i);
    int ents = static_cast<int>(rng() % 4);
    for (int e = 0; e < ents; ++e) g.entities.push_back(labels[rng() % labels.size()]);
    int ts = static_cast<int>(rng() % 5);
    for (int t = 0; t < ts; ++t) {
      g.triples.push_back({labels[rng() % labels.size()], preds[rng() % preds.size()], labels[rng() % labels.size()],
                           g.chunk_id});
    }
    out.push_back(std::move(g));
  }
  return out;
}


// Surface variants of a label: case changes and naive plural/singular.
inline std::string variant_of(const std::string& label, std::mt19937_64& rng) {
  std::string v = label;
  switch (rng() % 3) {
    case 0:
      for (auto& c : v) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      break;
    case 1:
      if (!v.empty()) v[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(v[0])));
      break;
    default:
      v += "s";
  }
  return v;
}

// Random graph plus case and plural variants of about half its entities, with
// predicate case variants.
inline KnowledgeGraph random_variant_graph(std::mt19937_64& rng) {
  KnowledgeGraph g = random_graph(rng, 5 + static_cast<int>(rng() % 30), 10 + static_cast<int>(rng() % 40), false);
  std::vector<std::string> labels(g.entities().begin(), g.entities().end());
  for (const auto& e : labels) {
    if (rng() % 2) g.add_triple({variant_of(e, rng), rng() % 2 ? "Likes" : "likes", e});
  }
  return g;
}

// Empty when the resolution keeps every structural promise; otherwise one
// message per broken promise.
inline std::vector<std::string> resolution_violations(const KnowledgeGraph& pre, const Resolution& r) {
  std::vector<std::string> bad;
  if (r.graph.entities().size() > pre.entities().size()) bad.push_back("entity count grew");
  if (r.graph.relations().size() > pre.relations().size()) bad.push_back("relation count grew");
  if (r.graph.edges().size() > pre.edges().size()) bad.push_back("edge count grew");
  if (r.graph.triples().size() > pre.triples().size()) bad.push_back("triple count grew");

  auto check_map = [&](const ClusterMap& m, const std::set<std::string>& labels, const char* what) {
    std::set<std::string> seen;
    for (const auto& [canonical, members] : m.clusters()) {
      if (!members.count(canonical)) bad.push_back(std::string(what) + ": canonical outside its cluster");
      for (const auto& x : members) {
        if (!seen.insert(x).second) bad.push_back(std::string(what) + ": label in two clusters: " + x);
        if (x != canonical && !labels.count(x)) bad.push_back(std::string(what) + ": unknown member " + x);
      }
    }
  };
  check_map(r.entity_map, pre.entities(), "entities");
  check_map(r.edge_map, pre.relations(), "edges");

  std::set<Triple> image;
  for (const auto& t : pre.triples()) {
    Triple mapped{r.entity_map.canonical_of(t.subject), r.edge_map.canonical_of(t.predicate),
                  r.entity_map.canonical_of(t.object), t.chunk};
    if (!r.graph.triples().count(mapped)) bad.push_back("pre-triple without image: " + t.subject);
    image.insert(mapped);
  }
  if (image != r.graph.triples()) bad.push_back("post-triples not covered by pre-triples");
  return bad;
}

}  // namespace kggen::testing
