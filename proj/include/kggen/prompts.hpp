#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace kggen {

// Bumped whenever any template text changes. Run manifests record it next to
// per-template hashes.
inline constexpr std::string_view kPromptSetVersion = "1";

enum class PromptId {
  ExtractEntities,
  ExtractRelations,
  ExtractEntitiesOriginal,
  ExtractRelationsOriginal,
  ClusterEntities,
  ValidateEntityCluster,
  ClusterEdges,
  ValidateEdgeCluster,
  LabelCluster,
  AssignToCluster,
  ResolveDuplicates,
  ExtractFacts,
  JudgeFact,
  RagAnswer,
  JudgeAnswer,
};

std::span<const PromptId> all_prompts();

std::string_view prompt_name(PromptId id);
std::optional<PromptId> prompt_from_name(std::string_view name);

// Raw template text; slots are written {name}.
std::string_view prompt_template(PromptId id);

// Slot names the template expects, in order of appearance.
std::span<const std::string_view> prompt_slots(PromptId id);

// Substitutes every slot. Throws ValidationError for missing or unknown slots.
std::string render_prompt(PromptId id, const std::map<std::string, std::string>& slots = {});

// Hex FNV-1a of the template text.
std::string prompt_hash(PromptId id);

}  // namespace kggen
