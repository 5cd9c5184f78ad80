#pragma once

#include <span>
#include <vector>

#include "kggen/extractor.hpp"
#include "kggen/graph.hpp"

namespace kggen {

// Union of chunk graphs into one graph. Every label is normalized
// (text::normalize_label); labels that normalize to nothing are dropped. The
// chunk table is filled from the supplied chunks. No model calls.
KnowledgeGraph aggregate(std::span<const ChunkGraph> graphs, std::span<const SourceChunk> chunks = {});

// Same merge over already-built graphs. Cluster maps are not carried over.
KnowledgeGraph aggregate(std::span<const KnowledgeGraph> graphs);

}  // namespace kggen
