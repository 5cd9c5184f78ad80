#include "kggen/resolver.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <numeric>
#include <set>
#include <thread>

#include "kggen/errors.hpp"
#include "kggen/text.hpp"

namespace kggen {

void ResolutionParams::validate() const {
  if (patience < 1) throw ValidationError("patience (n) must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size (b) must be >= 1");
  if (cluster_size < 2) throw ValidationError("cluster size must be >= 2");
  if (top_k < 1) throw ValidationError("k must be >= 1");
}

namespace {

struct AliasGroup {
  std::string canonical;
  std::set<std::string> members;
};

std::string pick_label(const std::set<std::string>& labels) {
  return shortest_label(std::vector<std::string>(labels.begin(), labels.end()));
}

// Label degrees: triples an entity touches, or triples using a predicate.
std::map<std::string, std::size_t> degrees(const KnowledgeGraph& g, LabelDomain domain) {
  std::map<std::string, std::size_t> out;
  if (domain == LabelDomain::Entities) {
    for (const auto& e : g.entities()) out[e] = 0;
    for (const auto& e : g.edges()) {
      ++out[e.subject];
      if (e.object != e.subject) ++out[e.object];
    }
  } else {
    for (const auto& r : g.relations()) out[r] = 0;
    for (const auto& e : g.edges()) ++out[e.predicate];
  }
  return out;
}

class UnionFind {
 public:
  std::size_t id(const std::string& label) {
    auto [it, inserted] = index_.emplace(label, parent_.size());
    if (inserted) {
      parent_.push_back(parent_.size());
      names_.push_back(label);
    }
    return it->second;
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }
  const std::string& name(std::size_t x) const { return names_[x]; }
  std::size_t size() const { return parent_.size(); }

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<std::size_t> parent_;
  std::vector<std::string> names_;
};

// Merges groups that share a member or a canonical label into a partition.
ClusterMap merge_groups(const std::vector<AliasGroup>& groups, const std::set<std::string>& universe,
                        LabelDomain domain) {
  UnionFind uf;
  for (const auto& g : groups) {
    std::size_t root = uf.id(g.canonical);
    for (const auto& m : g.members) uf.unite(root, uf.id(m));
  }
  std::map<std::size_t, std::set<std::string>> component_labels;
  std::map<std::size_t, std::set<std::string>> component_canonicals;
  for (std::size_t i = 0; i < uf.size(); ++i) component_labels[uf.find(i)].insert(uf.name(i));
  for (const auto& g : groups) component_canonicals[uf.find(uf.id(g.canonical))].insert(g.canonical);

  ClusterMap map(domain);
  for (const auto& [root, labels] : component_labels) {
    std::set<std::string> members;
    for (const auto& l : labels) {
      if (universe.count(l)) members.insert(l);
    }
    if (members.size() < 2) continue;
    map.add_cluster(pick_label(component_canonicals[root]), std::move(members));
  }
  return map;
}

}  // namespace

// ---------------------------------------------------------------------------
// Iterative strategy

ClusterMap cluster_iterative(const std::vector<std::string>& labels, LabelDomain domain,
                             const ResolutionParams& params, ModelGateway& gateway) {
  params.validate();
  const std::set<std::string> universe(labels.begin(), labels.end());
  std::vector<std::string> remaining(universe.begin(), universe.end());
  std::vector<AliasGroup> clusters;
  std::set<std::string> canonicals;

  auto choose_canonical = [&](const std::vector<std::string>& members) {
    std::string label = text::normalize_label(gateway.label_cluster(members, domain));
    bool is_member = std::find(members.begin(), members.end(), label) != members.end();
    if (label.empty() || (!is_member && universe.count(label)) || canonicals.count(label)) {
      label = shortest_label(members);
    }
    canonicals.insert(label);
    return label;
  };

  int failures = 0;
  while (failures < params.patience && remaining.size() >= 2) {
    std::vector<std::string> confirmed;
    try {
      auto proposal = gateway.propose_cluster(remaining, domain, params.instruction);
      if (proposal.size() >= 2) confirmed = gateway.validate_cluster(proposal, domain);
    } catch (const ModelError& e) {
      spdlog::warn("cluster proposal failed: {}", e.what());
    }
    if (confirmed.size() < 2) {
      ++failures;
      continue;
    }
    failures = 0;
    AliasGroup group{choose_canonical(confirmed), {confirmed.begin(), confirmed.end()}};
    std::erase_if(remaining, [&](const std::string& l) { return group.members.count(l) > 0; });
    clusters.push_back(std::move(group));
  }

  if (!clusters.empty()) {
    for (std::size_t start = 0; start < remaining.size(); start += params.batch_size) {
      std::vector<std::string> batch(remaining.begin() + static_cast<std::ptrdiff_t>(start),
                                     remaining.begin() + static_cast<std::ptrdiff_t>(
                                                             std::min(remaining.size(), start + params.batch_size)));
      std::map<std::string, std::set<std::string>> current;
      for (const auto& c : clusters) current[c.canonical] = c.members;
      std::map<std::string, std::string> assignment;
      try {
        assignment = gateway.assign_to_clusters(batch, current, domain);
      } catch (const ModelError& e) {
        spdlog::warn("residual assignment failed for a batch: {}", e.what());
        continue;
      }
      for (const auto& item : batch) {
        auto it = assignment.find(item);
        if (it == assignment.end()) continue;
        auto cluster = std::find_if(clusters.begin(), clusters.end(),
                                    [&](const AliasGroup& c) { return c.canonical == it->second; });
        std::vector<std::string> candidate(cluster->members.begin(), cluster->members.end());
        candidate.push_back(item);
        try {
          auto confirmed = gateway.validate_cluster(candidate, domain);
          if (std::find(confirmed.begin(), confirmed.end(), item) != confirmed.end()) {
            cluster->members.insert(item);
          }
        } catch (const ModelError& e) {
          spdlog::warn("validation of \"{}\" failed: {}", item, e.what());
        }
      }
    }
  }
  return merge_groups(clusters, universe, domain);
}

// ---------------------------------------------------------------------------
// Hybrid strategy

ClusterMap cluster_hybrid(const std::vector<std::string>& labels, const std::map<std::string, std::size_t>& degree,
                          LabelDomain domain, const ResolutionParams& params, ModelGateway& gateway,
                          Embedder& embedder) {
  params.validate();
  const std::set<std::string> universe(labels.begin(), labels.end());
  const std::vector<std::string> items(universe.begin(), universe.end());
  if (items.size() < 2) return ClusterMap(domain);

  const auto vectors = embed(items, embedder);
  const auto km = kmeans(vectors, params.cluster_size, params.seed);
  std::size_t cluster_count = 0;
  for (auto c : km.assignment) cluster_count = std::max(cluster_count, c + 1);
  std::vector<std::vector<std::size_t>> members(cluster_count);
  for (std::size_t i = 0; i < items.size(); ++i) members[km.assignment[i]].push_back(i);

  auto degree_of = [&](std::size_t i) {
    auto it = degree.find(items[i]);
    return it == degree.end() ? std::size_t{0} : it->second;
  };

  auto resolve_cluster = [&](std::vector<std::size_t> remaining) {
    std::vector<AliasGroup> groups;
    std::stable_sort(remaining.begin(), remaining.end(), [&](std::size_t a, std::size_t b) {
      return degree_of(a) != degree_of(b) ? degree_of(a) > degree_of(b) : items[a] < items[b];
    });
    while (!remaining.empty()) {
      const std::size_t head = remaining.front();
      std::vector<std::string> others;
      std::vector<EmbeddingVector> other_vectors;
      for (std::size_t j = 1; j < remaining.size(); ++j) {
        others.push_back(items[remaining[j]]);
        other_vectors.push_back(vectors[remaining[j]]);
      }
      std::set<std::string> group{items[head]};
      std::string alias = items[head];
      if (!others.empty()) {
        auto candidates = fused_rank(items[head], vectors[head], others, other_vectors, params.top_k);
        std::vector<std::string> offered;
        for (const auto& c : candidates) offered.push_back(c.text);
        try {
          DuplicateMatch match = gateway.find_duplicates(items[head], offered, domain);
          group.insert(match.duplicates.begin(), match.duplicates.end());
          alias = text::normalize_label(match.alias);
          if (alias.empty()) alias = items[head];
        } catch (const ModelError& e) {
          spdlog::warn("duplicate search for \"{}\" failed: {}", items[head], e.what());
        }
      }
      std::erase_if(remaining, [&](std::size_t i) { return group.count(items[i]) > 0; });
      if (group.size() >= 2) groups.push_back({alias, std::move(group)});
    }
    return groups;
  };

  std::vector<std::vector<AliasGroup>> per_cluster(cluster_count);
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(cluster_count);
  auto worker = [&] {
    for (std::size_t c = next++; c < cluster_count; c = next++) {
      try {
        per_cluster[c] = resolve_cluster(members[c]);
      } catch (const std::exception& e) {
        errors[c] = e.what();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(std::max(params.jobs, 1), cluster_count);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw PipelineError("hybrid resolution failed: " + e);
  }

  std::vector<AliasGroup> groups;
  for (auto& g : per_cluster) std::move(g.begin(), g.end(), std::back_inserter(groups));
  return merge_groups(groups, universe, domain);
}

// ---------------------------------------------------------------------------
// Graph-level entry points

Resolution resolve_iterative(const KnowledgeGraph& graph, const ResolutionParams& params, ModelGateway& gateway) {
  Resolution r;
  r.entity_map = cluster_iterative({graph.entities().begin(), graph.entities().end()}, LabelDomain::Entities,
                                   params, gateway);
  r.edge_map = cluster_iterative({graph.relations().begin(), graph.relations().end()}, LabelDomain::Predicates,
                                 params, gateway);
  r.graph = apply_cluster_map(graph, r.entity_map, r.edge_map);
  return r;
}

Resolution resolve_hybrid(const KnowledgeGraph& graph, const ResolutionParams& params, ModelGateway& gateway,
                          Embedder& embedder) {
  Resolution r;
  r.entity_map = cluster_hybrid({graph.entities().begin(), graph.entities().end()},
                                degrees(graph, LabelDomain::Entities), LabelDomain::Entities, params, gateway,
                                embedder);
  r.edge_map = cluster_hybrid({graph.relations().begin(), graph.relations().end()},
                              degrees(graph, LabelDomain::Predicates), LabelDomain::Predicates, params, gateway,
                              embedder);
  r.graph = apply_cluster_map(graph, r.entity_map, r.edge_map);
  return r;
}

Resolution resolve(const KnowledgeGraph& graph, const ResolutionParams& params, ModelGateway& gateway,
                   Embedder& embedder) {
  return params.strategy == ResolutionStrategy::Iterative ? resolve_iterative(graph, params, gateway)
                                                          : resolve_hybrid(graph, params, gateway, embedder);
}

KnowledgeGraph apply_cluster_map(const KnowledgeGraph& graph, const ClusterMap& entity_map,
                                 const ClusterMap& edge_map) {
  auto check = [](const ClusterMap& map, const std::set<std::string>& labels, const char* what) {
    for (const auto& [canonical, members] : map.clusters()) {
      for (const auto& m : members) {
        if (m != canonical && !labels.count(m)) {
          throw ValidationError(std::string(what) + " cluster \"" + canonical + "\" lists unknown label \"" + m + "\"");
        }
      }
    }
  };
  check(entity_map, graph.entities(), "entity");
  check(edge_map, graph.relations(), "edge");

  KnowledgeGraph out;
  for (const auto& [id, text] : graph.chunks()) out.add_chunk(id, text);
  for (const auto& e : graph.entities()) out.add_entity(entity_map.canonical_of(e));
  for (const auto& r : graph.relations()) out.add_relation(edge_map.canonical_of(r));
  for (const auto& t : graph.triples()) {
    out.add_triple({entity_map.canonical_of(t.subject), edge_map.canonical_of(t.predicate),
                    entity_map.canonical_of(t.object), t.chunk});
  }
  out.set_cluster_maps(entity_map, edge_map);
  out.validate();
  return out;
}

}  // namespace kggen
