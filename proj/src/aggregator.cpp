#include "kggen/aggregator.hpp"

#include <spdlog/spdlog.h>

#include "kggen/errors.hpp"
#include "kggen/text.hpp"

namespace kggen {

namespace {

class Merger {
 public:
  void entity(const std::string& raw) {
    std::string label = text::normalize_label(raw);
    if (label.empty()) {
      spdlog::warn("aggregate: dropped entity that normalizes to an empty label");
      return;
    }
    graph_.add_entity(label);
  }

  void relation(const std::string& raw) {
    std::string label = text::normalize_label(raw);
    if (label.empty()) return;
    graph_.add_relation(label);
  }

  void triple(const Triple& t) {
    Triple n{text::normalize_label(t.subject), text::normalize_label(t.predicate), text::normalize_label(t.object),
             t.chunk};
    if (n.subject.empty() || n.predicate.empty() || n.object.empty()) {
      spdlog::warn("aggregate: dropped triple with a field that normalizes to empty");
      return;
    }
    graph_.add_triple(std::move(n));
  }

  void chunk(const std::string& id, const std::string& text) { graph_.add_chunk(id, text); }

  KnowledgeGraph take() {
    graph_.validate();
    return std::move(graph_);
  }

 private:
  KnowledgeGraph graph_;
};

}  // namespace

KnowledgeGraph aggregate(std::span<const ChunkGraph> graphs, std::span<const SourceChunk> chunks) {
  Merger merger;
  for (const auto& c : chunks) merger.chunk(c.id, c.text);
  for (const auto& g : graphs) {
    for (const auto& e : g.entities) merger.entity(e);
    for (const auto& t : g.triples) merger.triple(t);
  }
  return merger.take();
}

KnowledgeGraph aggregate(std::span<const KnowledgeGraph> graphs) {
  Merger merger;
  for (const auto& g : graphs) {
    for (const auto& [id, text] : g.chunks()) merger.chunk(id, text);
    for (const auto& e : g.entities()) merger.entity(e);
    for (const auto& r : g.relations()) merger.relation(r);
    for (const auto& t : g.triples()) merger.triple(t);
  }
  return merger.take();
}

}  // namespace kggen
