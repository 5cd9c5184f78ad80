#include "kggen/extractor.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "kggen/errors.hpp"
#include "kggen/text.hpp"

namespace kggen {

using nlohmann::json;

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

// Largest split position in (pos, limit] satisfying pred, or npos.
template <class Pred>
std::size_t last_split(std::size_t pos, std::size_t limit, Pred pred) {
  for (std::size_t i = limit; i > pos; --i) {
    if (pred(i)) return i;
  }
  return std::string::npos;
}

}  // namespace

std::vector<SourceChunk> chunk_text(const Document& document, std::size_t max_chars) {
  if (max_chars < kMinChunkChars) {
    throw ValidationError("max_chars must be at least " + std::to_string(kMinChunkChars));
  }
  const std::string& doc = document.text;
  const std::size_t n = doc.size();
  std::vector<SourceChunk> chunks;

  std::size_t pos = 0;
  while (pos < n && is_space(doc[pos])) ++pos;
  while (pos < n) {
    std::size_t split = n;
    if (n - pos > max_chars) {
      const std::size_t limit = pos + max_chars;
      // Blank line: a newline whose preceding line holds only whitespace.
      split = last_split(pos, limit, [&](std::size_t i) {
        if (doc[i] != '\n') return false;
        std::size_t j = i;
        while (j > pos && (doc[j - 1] == ' ' || doc[j - 1] == '\t' || doc[j - 1] == '\r')) --j;
        return j > pos && doc[j - 1] == '\n';
      });
      if (split == std::string::npos) {
        split = last_split(pos, limit, [&](std::size_t i) {
          char prev = doc[i - 1];
          return (prev == '.' || prev == '!' || prev == '?') && is_space(doc[i]);
        });
      }
      if (split == std::string::npos) {
        split = last_split(pos, limit, [&](std::size_t i) { return is_space(doc[i]); });
      }
      if (split == std::string::npos) {
        split = limit;
        while (split > pos + 1 && is_continuation(doc[split])) --split;
      }
    }
    std::size_t end = split;
    while (end > pos && is_space(doc[end - 1])) --end;
    SourceChunk chunk;
    chunk.id = document.id + "#" + std::to_string(chunks.size());
    chunk.text = doc.substr(pos, end - pos);
    chunk.document = document.id;
    chunk.start = pos;
    chunk.end = end;
    chunks.push_back(std::move(chunk));
    pos = split;
    while (pos < n && is_space(doc[pos])) ++pos;
  }
  return chunks;
}

GenerateResult generate(const std::vector<SourceChunk>& chunks, ModelGateway& gateway, int jobs) {
  GenerateResult result;
  result.chunks = chunks;
  if (chunks.empty()) return result;

  std::vector<std::optional<ChunkGraph>> graphs(chunks.size());
  std::vector<std::string> errors(chunks.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < chunks.size(); i = next++) {
      const SourceChunk& chunk = chunks[i];
      try {
        ChunkGraph g;
        g.chunk_id = chunk.id;
        g.entities = gateway.extract_entities(chunk.text);
        if (!g.entities.empty()) {
          RelationExtraction rel = gateway.extract_relations(chunk.text, g.entities);
          g.entities = std::move(rel.entities);
          g.repaired_entities = std::move(rel.added_entities);
          for (auto& t : rel.triples) {
            t.chunk = chunk.id;
            g.triples.push_back(std::move(t));
          }
        }
        graphs[i] = std::move(g);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };

  const std::size_t threads = std::min<std::size_t>(std::max(jobs, 1), chunks.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (graphs[i]) {
      result.graphs.push_back(std::move(*graphs[i]));
    } else {
      spdlog::warn("chunk {} failed: {}", chunks[i].id, errors[i]);
      result.failures.push_back({chunks[i].id, errors[i]});
    }
  }
  if (result.graphs.empty()) {
    throw PipelineError("extraction failed for all " + std::to_string(chunks.size()) + " chunk(s); first error: " +
                        result.failures.front().error);
  }
  return result;
}

std::vector<Document> read_documents(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::filesystem::path p(path);
  if (p.extension() != ".jsonl") {
    std::ostringstream ss;
    ss << in.rdbuf();
    return {{p.stem().string(), ss.str()}};
  }
  std::vector<Document> docs;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    std::size_t line_start = offset;
    offset += line.size() + 1;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path + ": " + e.what(), line_start + e.byte);
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["text"].is_string()) {
      throw ParseError(path + ": each line needs \"id\" and \"text\"", line_start);
    }
    std::string id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    docs.push_back({std::move(id), j["text"].get<std::string>()});
  }
  return docs;
}

json chunk_graphs_to_json(const GenerateResult& result) {
  json chunks = json::array();
  for (const auto& c : result.chunks) {
    chunks.push_back({{"id", c.id}, {"document", c.document}, {"start", c.start}, {"end", c.end}, {"text", c.text}});
  }
  json graphs = json::array();
  for (const auto& g : result.graphs) {
    json triples = json::array();
    for (const auto& t : g.triples) triples.push_back({t.subject, t.predicate, t.object});
    graphs.push_back({{"chunk_id", g.chunk_id},
                      {"entities", g.entities},
                      {"triples", triples},
                      {"repaired_entities", g.repaired_entities}});
  }
  json failures = json::array();
  for (const auto& f : result.failures) failures.push_back({{"chunk_id", f.chunk_id}, {"error", f.error}});
  return {{"format", "kggen-chunk-graphs"},
          {"version", kFormatVersion},
          {"chunks", chunks},
          {"graphs", graphs},
          {"failures", failures}};
}

GenerateResult chunk_graphs_from_json(const json& doc) {
  check_artifact_header(doc, "kggen-chunk-graphs");
  GenerateResult result;
  try {
    for (const auto& c : doc.at("chunks")) {
      result.chunks.push_back({c.at("id").get<std::string>(), c.at("text").get<std::string>(),
                               c.at("document").get<std::string>(), c.at("start").get<std::size_t>(),
                               c.at("end").get<std::size_t>()});
    }
    for (const auto& g : doc.at("graphs")) {
      ChunkGraph cg;
      cg.chunk_id = g.at("chunk_id").get<std::string>();
      cg.entities = g.at("entities").get<std::vector<std::string>>();
      cg.repaired_entities = g.value("repaired_entities", std::vector<std::string>{});
      for (const auto& t : g.at("triples")) {
        if (!t.is_array() || t.size() != 3) throw ParseError("chunk graph triple must be [s, p, o]", std::string::npos);
        cg.triples.push_back({t[0].get<std::string>(), t[1].get<std::string>(), t[2].get<std::string>(), cg.chunk_id});
      }
      result.graphs.push_back(std::move(cg));
    }
    for (const auto& f : doc.value("failures", json::array())) {
      result.failures.push_back({f.at("chunk_id").get<std::string>(), f.at("error").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed chunk-graphs file: ") + e.what(), std::string::npos);
  }
  return result;
}

}  // namespace kggen
