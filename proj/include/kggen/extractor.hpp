#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kggen/graph.hpp"
#include "kggen/model.hpp"

namespace kggen {

inline constexpr std::size_t kDefaultMaxChunkChars = 8000;
inline constexpr std::size_t kMinChunkChars = 200;

struct Document {
  std::string id;
  std::string text;
};

struct SourceChunk {
  std::string id;  // "<document id>#<index>"
  std::string text;
  std::string document;
  std::size_t start = 0;  // byte offsets into the document
  std::size_t end = 0;

  bool operator==(const SourceChunk&) const = default;
};

// Splits a document into ordered, non-overlapping chunks of at most max_chars
// bytes. Splits prefer a blank line, then a sentence end, then whitespace, and
// never cut a UTF-8 sequence. Whitespace at chunk boundaries is dropped.
// Throws ValidationError when max_chars < kMinChunkChars.
std::vector<SourceChunk> chunk_text(const Document& document, std::size_t max_chars = kDefaultMaxChunkChars);

struct ChunkGraph {
  std::string chunk_id;
  std::vector<std::string> entities;
  std::vector<Triple> triples;  // chunk == chunk_id
  std::vector<std::string> repaired_entities;

  bool operator==(const ChunkGraph&) const = default;
};

struct ChunkFailure {
  std::string chunk_id;
  std::string error;
};

struct GenerateResult {
  std::vector<SourceChunk> chunks;
  std::vector<ChunkGraph> graphs;  // in chunk order, failed chunks omitted
  std::vector<ChunkFailure> failures;
};

// Entity extraction then relation extraction for each chunk, up to `jobs`
// chunks at a time. Per-chunk model failures are recorded; if every chunk
// fails, throws PipelineError.
GenerateResult generate(const std::vector<SourceChunk>& chunks, ModelGateway& gateway, int jobs = 1);

// Plain-text file -> one document named after the file stem; .jsonl -> one
// document per {"id", "text"} line. Throws Error (unreadable) or ParseError.
std::vector<Document> read_documents(const std::string& path);

nlohmann::json chunk_graphs_to_json(const GenerateResult& result);
GenerateResult chunk_graphs_from_json(const nlohmann::json& doc);

}  // namespace kggen
