#include "kggen/graph.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "kggen/errors.hpp"
#include "kggen/text.hpp"

namespace kggen {

using nlohmann::json;

namespace {

constexpr std::string_view kGraphFormat = "kggen-graph";

std::string clean_label(std::string_view s) { return text::nfc(text::trim(s)); }

[[noreturn]] void structure_error(const std::string& what) {
  throw ParseError("malformed graph: " + what, std::string::npos);
}

const json& require(const json& doc, const char* key, json::value_t type) {
  auto it = doc.find(key);
  if (it == doc.end()) structure_error(std::string("missing \"") + key + "\"");
  if (it->type() != type) structure_error(std::string("\"") + key + "\" has the wrong type");
  return *it;
}

std::string require_string(const json& v, const std::string& where) {
  if (!v.is_string()) structure_error(where + " must be a string");
  return v.get<std::string>();
}

}  // namespace

void validate_triple(const Triple& t) {
  if (text::trim(t.subject).empty()) throw ValidationError("triple has an empty subject");
  if (text::trim(t.predicate).empty()) throw ValidationError("triple has an empty predicate");
  if (text::trim(t.object).empty()) throw ValidationError("triple has an empty object");
  if (t.chunk && t.chunk->empty()) throw ValidationError("triple has an empty chunk id");
}

std::string_view domain_name(LabelDomain d) {
  return d == LabelDomain::Entities ? "entities" : "edges";
}

// ---------------------------------------------------------------------------
// ClusterMap

void ClusterMap::add_cluster(const std::string& canonical, std::set<std::string> members) {
  if (canonical.empty()) throw ValidationError("cluster canonical label is empty");
  members.insert(canonical);
  if (clusters_.count(canonical)) {
    throw ValidationError("duplicate canonical label: " + canonical);
  }
  for (const auto& m : members) {
    if (m.empty()) throw ValidationError("cluster member is empty");
    if (owner_.count(m)) {
      throw ValidationError("label \"" + m + "\" already belongs to cluster \"" + owner_.at(m) + "\"");
    }
  }
  for (const auto& m : members) owner_.emplace(m, canonical);
  clusters_.emplace(canonical, std::move(members));
}

const std::string& ClusterMap::canonical_of(const std::string& label) const {
  auto it = owner_.find(label);
  return it == owner_.end() ? label : it->second;
}

// ---------------------------------------------------------------------------
// KnowledgeGraph

bool KnowledgeGraph::add_triple(Triple t) {
  validate_triple(t);
  t.subject = clean_label(t.subject);
  t.predicate = clean_label(t.predicate);
  t.object = clean_label(t.object);
  entities_.insert(t.subject);
  entities_.insert(t.object);
  relations_.insert(t.predicate);
  return triples_.insert(std::move(t)).second;
}

void KnowledgeGraph::add_entity(std::string_view label) {
  std::string clean = clean_label(label);
  if (clean.empty()) throw ValidationError("entity label is empty");
  entities_.insert(std::move(clean));
}

void KnowledgeGraph::add_relation(std::string_view predicate) {
  std::string clean = clean_label(predicate);
  if (clean.empty()) throw ValidationError("relation label is empty");
  relations_.insert(std::move(clean));
}

void KnowledgeGraph::add_chunk(const std::string& id, std::string text) {
  if (id.empty()) throw ValidationError("chunk id is empty");
  auto [it, inserted] = chunks_.emplace(id, text);
  if (!inserted && it->second != text) {
    throw ValidationError("chunk \"" + id + "\" registered twice with different text");
  }
}

std::set<Edge> KnowledgeGraph::edges() const {
  std::set<Edge> out;
  for (const auto& t : triples_) out.insert(edge_of(t));
  return out;
}

bool KnowledgeGraph::has_full_provenance() const {
  if (triples_.empty()) return false;
  for (const auto& t : triples_) {
    if (!t.chunk || !chunks_.count(*t.chunk)) return false;
  }
  return true;
}

void KnowledgeGraph::set_cluster_maps(std::optional<ClusterMap> entity_map,
                                      std::optional<ClusterMap> edge_map) {
  entity_clusters_ = std::move(entity_map);
  edge_clusters_ = std::move(edge_map);
}

void KnowledgeGraph::validate() const {
  for (const auto& t : triples_) {
    validate_triple(t);
    if (!entities_.count(t.subject)) throw ValidationError("unknown subject entity: " + t.subject);
    if (!entities_.count(t.object)) throw ValidationError("unknown object entity: " + t.object);
    if (!relations_.count(t.predicate)) throw ValidationError("unknown predicate: " + t.predicate);
    if (!chunks_.empty() && t.chunk && !chunks_.count(*t.chunk)) {
      throw ValidationError("triple references unknown chunk: " + *t.chunk);
    }
  }
}

// ---------------------------------------------------------------------------
// Stats

double dedup_ratio(std::size_t pre, std::size_t post) {
  if (pre == 0) return 1.0;
  return static_cast<double>(post) / static_cast<double>(pre);
}

double edge_reuse(const KnowledgeGraph& g) {
  if (g.relations().empty()) return 0.0;
  return static_cast<double>(g.edges().size()) / static_cast<double>(g.relations().size());
}

GraphStats compute_stats(const KnowledgeGraph& pre, const KnowledgeGraph& post) {
  GraphStats s;
  s.entities_pre = pre.entities().size();
  s.entities_post = post.entities().size();
  s.relations_pre = pre.relations().size();
  s.relations_post = post.relations().size();
  s.edges_pre = pre.edges().size();
  s.edges_post = post.edges().size();
  s.edge_reuse = edge_reuse(post);
  s.entity_dedup_ratio = dedup_ratio(s.entities_pre, s.entities_post);
  s.relation_dedup_ratio = dedup_ratio(s.relations_pre, s.relations_post);
  s.edge_dedup_ratio = dedup_ratio(s.edges_pre, s.edges_post);
  s.degenerate = s.entities_pre == 0 || s.relations_pre == 0 || s.edges_pre == 0;
  return s;
}

json stats_to_json(const GraphStats& s) {
  return json{
      {"format", "kggen-stats"},
      {"version", kFormatVersion},
      {"entities", {{"pre", s.entities_pre}, {"post", s.entities_post}, {"dedup_ratio", s.entity_dedup_ratio}}},
      {"relations", {{"pre", s.relations_pre}, {"post", s.relations_post}, {"dedup_ratio", s.relation_dedup_ratio}}},
      {"edges", {{"pre", s.edges_pre}, {"post", s.edges_post}, {"dedup_ratio", s.edge_dedup_ratio}}},
      {"edge_reuse", s.edge_reuse},
      {"degenerate", s.degenerate},
  };
}

std::string render_stats(const GraphStats& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "entities   %zu -> %zu  (de-dup ratio %.3f)\n"
                "relations  %zu -> %zu  (de-dup ratio %.3f)\n"
                "edges      %zu -> %zu  (de-dup ratio %.3f)\n"
                "edge reuse %.3f\n",
                s.entities_pre, s.entities_post, s.entity_dedup_ratio, s.relations_pre,
                s.relations_post, s.relation_dedup_ratio, s.edges_pre, s.edges_post,
                s.edge_dedup_ratio, s.edge_reuse);
  std::string out = buf;
  if (s.degenerate) out += "warning: degenerate corpus (a pre-resolution count is zero)\n";
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

json cluster_map_to_json(const ClusterMap& m) {
  json out = json::object();
  for (const auto& [canonical, members] : m.clusters()) out[canonical] = members;
  return out;
}

ClusterMap cluster_map_from_json(const json& j, LabelDomain domain) {
  if (!j.is_object()) structure_error("cluster map must be an object");
  ClusterMap m(domain);
  for (const auto& [canonical, members] : j.items()) {
    if (!members.is_array()) structure_error("cluster members must be an array");
    std::set<std::string> set;
    for (const auto& v : members) set.insert(require_string(v, "cluster member"));
    try {
      m.add_cluster(canonical, std::move(set));
    } catch (const ValidationError& e) {
      structure_error(e.what());
    }
  }
  return m;
}

void check_artifact_header(const json& doc, std::string_view format) {
  if (!doc.is_object()) structure_error("top level must be an object");
  auto f = doc.find("format");
  if (f == doc.end() || !f->is_string() || f->get<std::string>() != format) {
    structure_error("expected format \"" + std::string(format) + "\"");
  }
  auto v = doc.find("version");
  if (v == doc.end() || !v->is_number_integer()) structure_error("missing integer \"version\"");
  if (v->get<int>() != kFormatVersion) {
    throw SchemaVersionError("artifact has schema version " + std::to_string(v->get<int>()) +
                             " but this build reads version " + std::to_string(kFormatVersion) +
                             "; regenerate it with a matching kggen release");
  }
}

std::string serialize(const KnowledgeGraph& g) {
  json triples = json::array();
  for (const auto& t : g.triples()) {
    triples.push_back(json::array({t.subject, t.predicate, t.object, t.chunk ? json(*t.chunk) : json(nullptr)}));
  }
  json maps = json::object();
  if (g.entity_clusters()) maps["entities"] = cluster_map_to_json(*g.entity_clusters());
  if (g.edge_clusters()) maps["edges"] = cluster_map_to_json(*g.edge_clusters());
  json doc = {
      {"format", kGraphFormat},
      {"version", kFormatVersion},
      {"entities", g.entities()},
      {"relations", g.relations()},
      {"triples", std::move(triples)},
      {"chunks", g.chunks()},
      {"cluster_maps", std::move(maps)},
  };
  return doc.dump(2) + "\n";
}

KnowledgeGraph deserialize(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), e.byte);
  }
  check_artifact_header(doc, kGraphFormat);

  KnowledgeGraph g;
  std::set<std::string> declared_entities;
  std::set<std::string> declared_relations;
  for (const auto& v : require(doc, "entities", json::value_t::array)) {
    declared_entities.insert(clean_label(require_string(v, "entity")));
  }
  for (const auto& v : require(doc, "relations", json::value_t::array)) {
    declared_relations.insert(clean_label(require_string(v, "relation")));
  }
  try {
    for (const auto& e : declared_entities) g.add_entity(e);
    for (const auto& r : declared_relations) g.add_relation(r);
  } catch (const ValidationError& e) {
    structure_error(e.what());
  }
  for (const auto& [id, text] : require(doc, "chunks", json::value_t::object).items()) {
    g.add_chunk(id, require_string(text, "chunk text"));
  }
  std::size_t index = 0;
  for (const auto& row : require(doc, "triples", json::value_t::array)) {
    std::string where = "triples[" + std::to_string(index++) + "]";
    if (!row.is_array() || row.size() != 4) structure_error(where + " must be [s, p, o, chunk]");
    Triple t{require_string(row[0], where), require_string(row[1], where),
             require_string(row[2], where), std::nullopt};
    if (!row[3].is_null()) t.chunk = require_string(row[3], where);
    try {
      validate_triple(t);
    } catch (const ValidationError& e) {
      structure_error(where + ": " + e.what());
    }
    if (!declared_entities.count(clean_label(t.subject)) || !declared_entities.count(clean_label(t.object))) {
      structure_error(where + " references an undeclared entity");
    }
    if (!declared_relations.count(clean_label(t.predicate))) {
      structure_error(where + " references an undeclared relation");
    }
    g.add_triple(std::move(t));
  }

  std::optional<ClusterMap> entity_map;
  std::optional<ClusterMap> edge_map;
  if (auto it = doc.find("cluster_maps"); it != doc.end()) {
    if (!it->is_object()) structure_error("\"cluster_maps\" must be an object");
    if (it->contains("entities")) entity_map = cluster_map_from_json(it->at("entities"), LabelDomain::Entities);
    if (it->contains("edges")) edge_map = cluster_map_from_json(it->at("edges"), LabelDomain::Predicates);
  }
  g.set_cluster_maps(std::move(entity_map), std::move(edge_map));

  try {
    g.validate();
  } catch (const ValidationError& e) {
    structure_error(e.what());
  }
  return g;
}

KnowledgeGraph read_graph_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

void write_graph_file(const std::string& path, const KnowledgeGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << serialize(g);
}

}  // namespace kggen
