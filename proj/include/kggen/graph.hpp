#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace kggen {

// Current version of every JSON artifact the library writes.
inline constexpr int kFormatVersion = 1;

// One subject-predicate-object assertion, optionally tied to the chunk of
// source text it was extracted from.
struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;
  std::optional<std::string> chunk;

  auto operator<=>(const Triple&) const = default;
  bool operator==(const Triple&) const = default;
};

// Provenance-free identity of a triple. Stats and retrieval count these.
struct Edge {
  std::string subject;
  std::string predicate;
  std::string object;

  auto operator<=>(const Edge&) const = default;
  bool operator==(const Edge&) const = default;
};

inline Edge edge_of(const Triple& t) { return {t.subject, t.predicate, t.object}; }

// Throws ValidationError when a field is empty after trimming.
void validate_triple(const Triple& t);

enum class LabelDomain { Entities, Predicates };

std::string_view domain_name(LabelDomain d);

// Partition of a subset of labels into alias groups. Every cluster contains
// its canonical label; clusters are non-empty and pairwise disjoint.
class ClusterMap {
 public:
  explicit ClusterMap(LabelDomain domain = LabelDomain::Entities) : domain_(domain) {}

  LabelDomain domain() const { return domain_; }

  // Adds canonical to members if missing. Throws ValidationError when a member
  // already belongs to another cluster or the canonical is already in use.
  void add_cluster(const std::string& canonical, std::set<std::string> members);

  // Canonical label for a member; identity for labels outside every cluster.
  const std::string& canonical_of(const std::string& label) const;
  bool contains(const std::string& label) const { return owner_.count(label) > 0; }

  const std::map<std::string, std::set<std::string>>& clusters() const { return clusters_; }
  bool empty() const { return clusters_.empty(); }
  std::size_t size() const { return clusters_.size(); }

  bool operator==(const ClusterMap&) const = default;

 private:
  LabelDomain domain_;
  std::map<std::string, std::set<std::string>> clusters_;
  std::map<std::string, std::string> owner_;
};

// Entities, predicate vocabulary, provenance-tagged triples and the source
// chunks they came from. Triples have set semantics keyed on
// (subject, predicate, object, chunk).
class KnowledgeGraph {
 public:
  // Labels are trimmed and NFC-normalized. Returns false for a duplicate.
  bool add_triple(Triple t);
  void add_entity(std::string_view label);
  void add_relation(std::string_view predicate);
  void add_chunk(const std::string& id, std::string text);

  const std::set<std::string>& entities() const { return entities_; }
  const std::set<std::string>& relations() const { return relations_; }
  const std::set<Triple>& triples() const { return triples_; }
  const std::map<std::string, std::string>& chunks() const { return chunks_; }

  std::set<Edge> edges() const;

  // True when there is at least one triple and every triple names a chunk
  // present in the chunk table.
  bool has_full_provenance() const;

  const std::optional<ClusterMap>& entity_clusters() const { return entity_clusters_; }
  const std::optional<ClusterMap>& edge_clusters() const { return edge_clusters_; }
  void set_cluster_maps(std::optional<ClusterMap> entity_map, std::optional<ClusterMap> edge_map);

  bool empty() const { return entities_.empty() && relations_.empty() && triples_.empty(); }

  // Throws ValidationError on any broken graph invariant.
  void validate() const;

  bool operator==(const KnowledgeGraph&) const = default;

 private:
  std::set<std::string> entities_;
  std::set<std::string> relations_;
  std::set<Triple> triples_;
  std::map<std::string, std::string> chunks_;
  std::optional<ClusterMap> entity_clusters_;
  std::optional<ClusterMap> edge_clusters_;
};

struct GraphStats {
  std::size_t entities_pre = 0;
  std::size_t entities_post = 0;
  std::size_t relations_pre = 0;
  std::size_t relations_post = 0;
  std::size_t edges_pre = 0;
  std::size_t edges_post = 0;
  double edge_reuse = 0.0;
  double entity_dedup_ratio = 1.0;
  double relation_dedup_ratio = 1.0;
  double edge_dedup_ratio = 1.0;
  // Set when a pre count is zero and the matching ratio was defaulted to 1.
  bool degenerate = false;
};

// post / pre ratio; 1.0 when pre is zero.
double dedup_ratio(std::size_t pre, std::size_t post);

// Distinct (s, p, o) count divided by predicate vocabulary size; 0 without predicates.
double edge_reuse(const KnowledgeGraph& g);

GraphStats compute_stats(const KnowledgeGraph& pre, const KnowledgeGraph& post);

nlohmann::json stats_to_json(const GraphStats& s);
std::string render_stats(const GraphStats& s);

nlohmann::json cluster_map_to_json(const ClusterMap& m);
ClusterMap cluster_map_from_json(const nlohmann::json& j, LabelDomain domain);

// Canonical JSON document, sorted, two-space indented, trailing newline.
std::string serialize(const KnowledgeGraph& g);
KnowledgeGraph deserialize(std::string_view bytes);

KnowledgeGraph read_graph_file(const std::string& path);
void write_graph_file(const std::string& path, const KnowledgeGraph& g);

// Checks the "format"/"version" header of an artifact.
void check_artifact_header(const nlohmann::json& doc, std::string_view format);

}  // namespace kggen
