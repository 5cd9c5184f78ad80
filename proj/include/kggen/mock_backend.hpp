#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kggen/model.hpp"

namespace kggen {

// Deterministic offline backend. Scripted replies are looked up by
// (prompt name, hash of the canonical inputs JSON); anything unscripted falls
// through to rule-based policies:
//
//   extraction          empty lists
//   cluster proposal    first group of items sharing a duplicate key
//   cluster validation  echoes the items
//   cluster label       shortest member
//   residual assignment cluster whose member shares the item's duplicate key
//   duplicate finding   candidates matching the item under DuplicateRule;
//                       alias is the lowercased shortest of item + matches
//   fact extraction     first 15 sentences of the article
//   fact judge          1 iff the fact's token sequence occurs in one context line
//   RAG answer          triples text and evidence concatenated
//   answer judge        Yes iff the expected token sequence occurs in the response
class MockBackend : public ModelBackend {
 public:
  enum class DuplicateRule {
    // Equal duplicate keys.
    SameTokenSet,
    // One token set contains the other.
    TokenSubset,
  };

  struct Options {
    DuplicateRule duplicate_rule = DuplicateRule::SameTokenSet;
  };

  MockBackend() = default;
  explicit MockBackend(Options options) : options_(options) {}

  void script(PromptId id, const nlohmann::json& inputs, std::string response);

  // {"entries": [{"prompt": name, "inputs": {...}, "response": string|json}]}
  void load_script(const nlohmann::json& doc);
  void load_script_file(const std::string& path);

  std::string complete(const StructuredRequest& request) override;

  static std::string script_key(PromptId id, const nlohmann::json& inputs);

 private:
  std::string fallback(const StructuredRequest& request) const;
  bool duplicates(const std::string& a, const std::string& b) const;

  Options options_;
  std::map<std::string, std::string> script_;
};

// Sorted set of singularized lowercase tokens, joined by spaces.
std::string duplicate_key(std::string_view label);

// True when needle's token sequence occurs contiguously in haystack's tokens.
bool contains_token_sequence(std::string_view haystack, std::string_view needle);

}  // namespace kggen
