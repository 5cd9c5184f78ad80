#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kggen/embedder.hpp"
#include "kggen/graph.hpp"
#include "kggen/model.hpp"

namespace kggen {

enum class ResolutionStrategy { Iterative, Hybrid };

struct ResolutionParams {
  ResolutionStrategy strategy = ResolutionStrategy::Hybrid;
  // Iterative: consecutive failed proposals before the proposal loop stops.
  int patience = 5;
  // Iterative: leftover labels offered per residual-assignment call.
  std::size_t batch_size = 10;
  // Hybrid: target population of one k-means cluster.
  std::size_t cluster_size = 128;
  // Hybrid: candidates retrieved per item.
  std::size_t top_k = 16;
  // Iterative: optional extra guidance passed with every proposal.
  std::string instruction;
  std::uint64_t seed = 42;
  // Hybrid: k-means clusters resolved concurrently.
  int jobs = 1;

  // Throws ValidationError.
  void validate() const;
};

struct Resolution {
  KnowledgeGraph graph;
  ClusterMap entity_map{LabelDomain::Entities};
  ClusterMap edge_map{LabelDomain::Predicates};
};

// Propose / validate / label loop over `labels`, then residual assignment in
// batches. Model failures count as failed iterations.
ClusterMap cluster_iterative(const std::vector<std::string>& labels, LabelDomain domain,
                             const ResolutionParams& params, ModelGateway& gateway);

// k-means over embeddings, then within each k-means cluster: take the
// highest-degree remaining label, retrieve its fused top-k neighbours, ask the
// model for duplicates and an alias, remove the group, repeat. Groups that
// share a label or an alias are merged at the end.
ClusterMap cluster_hybrid(const std::vector<std::string>& labels, const std::map<std::string, std::size_t>& degree,
                          LabelDomain domain, const ResolutionParams& params, ModelGateway& gateway,
                          Embedder& embedder);

Resolution resolve_iterative(const KnowledgeGraph& graph, const ResolutionParams& params, ModelGateway& gateway);
Resolution resolve_hybrid(const KnowledgeGraph& graph, const ResolutionParams& params, ModelGateway& gateway,
                          Embedder& embedder);
Resolution resolve(const KnowledgeGraph& graph, const ResolutionParams& params, ModelGateway& gateway,
                   Embedder& embedder);

// Rewrites every label to its canonical form and records the maps on the
// result. Throws ValidationError when a non-canonical member is not a label of
// the graph.
KnowledgeGraph apply_cluster_map(const KnowledgeGraph& graph, const ClusterMap& entity_map,
                                 const ClusterMap& edge_map);

}  // namespace kggen
