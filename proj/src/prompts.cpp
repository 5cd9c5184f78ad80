#include "kggen/prompts.hpp"

#include <array>
#include <vector>

#include "kggen/errors.hpp"
#include "kggen/text.hpp"

namespace kggen {

namespace {

struct PromptEntry {
  PromptId id;
  std::string_view name;
  std::string_view text;
};

constexpr std::string_view kExtractEntities =
    "Extract key entities from the source text. Extracted entities are subjects or objects. "
    "This is for an extraction task, please be thorough and accurate to the reference text.";

constexpr std::string_view kExtractRelations =
    "Extract subject-predicate-object triples from the source text. Subject and object must be "
    "from entities list. Entities provided were previously extracted from the same source text. "
    "This is for an extraction task, please be thorough, accurate, and faithful to the reference "
    "text.";

constexpr std::string_view kExtractEntitiesOriginal =
    "Extract key entities from the given text. Extracted entities are nouns, verbs, or "
    "adjectives, particularly regarding sentiment. This is for an extraction task, please be "
    "thorough and accurate to the reference text.";

constexpr std::string_view kExtractRelationsOriginal =
    "Extract subject-predicate-object triples from the assistant message. A predicate (1-3 "
    "words) defines the relationship between the subject and object. Relationship may be fact "
    "or sentiment based on assistant's message. Subject and object are entities. Entities "
    "provided are from the assistant message and prior conversation history, though you may not "
    "need all of them. This is for an extraction task, please be thorough, accurate, and "
    "faithful to the reference text.";

constexpr std::string_view kClusterEntities =
    R"(Find ONE cluster of related entities from this list. A cluster should contain entities that are the same in meaning, with different:
- tenses
- plural forms
- stem forms
- upper/lower cases
Or entities with close semantic meanings.
Return only if you find entities that clearly belong together.
If you can't find a clear cluster, return an empty list.)";

constexpr std::string_view kValidateEntityCluster =
    R"(Verify if these entities belong in the same cluster.
A cluster should contain entities that are the same in meaning, with different:
- tenses
- plural forms
- stem forms
- upper/lower cases
Or entities with close semantic meanings.
Return the entities that you are confident belong together as a single cluster.
If you're not confident, return an empty list.)";

constexpr std::string_view kClusterEdges =
    R"(Find ONE cluster of closely related predicates from this list.
A cluster should contain predicates that are the same in meaning, with different:
- tenses
- plural forms
- stem forms
- upper/lower cases
Predicates are the relations between subject and object entities. Ensure that the predicates in the same cluster have very close semantic meanings to describe the relation between the same subject and object entities.
Return only if you find predicates that clearly belong together.
If you can't find a clear cluster, return an empty list.)";

constexpr std::string_view kValidateEdgeCluster =
    R"(Verify if these predicates belong in the same cluster.
A cluster should contain predicates that are the same in meaning, with different:
- tenses
- plural forms
- stem forms
- upper/lower cases
Predicates are the relations between subject and object entities. Ensure that the predicates in the same cluster have very close semantic meanings to describe the relation between the same subject and object entities.
Return the predicates that you are confident belong together as a single cluster.
If you're not confident, return an empty list.)";

// Names a validated cluster (iterative strategy).
constexpr std::string_view kLabelCluster =
    "Choose one name for this group of {item_type}. The name should express what all members "
    "of the group have in common. Prefer a member of the group when one fits.";

// Residual sweep: places leftover items into existing clusters.
constexpr std::string_view kAssignToCluster =
    "For each of the given {item_type}, decide whether it has the same meaning as one of the "
    "existing clusters. Assign an item only when it clearly belongs to that cluster; leave it "
    "out otherwise.";

constexpr std::string_view kResolveDuplicates =
    "Find duplicate {item_type} for the item and an alias that best represents the duplicates. "
    "Duplicates are those that are the same in meaning, such as with variation in tense, plural "
    "form, stem form, case, abbreviation, shorthand. Return an empty list if there are none.";

constexpr std::string_view kExtractFacts =
    R"(Extract 15 basic, single pieces of information from the following text that describe how one object relates to another. Present the pieces of info in short sentences and DO NOT include info not directly present in the text. Your output should be of the form [ "info1", "info2" ,..., "info15" ]. "Make sure the strings are valid Python strings.")";

constexpr std::string_view kJudgeFact =
    R"(ROLE: "You are an evaluator that checks if the correct answer can be deduced from the information in the context.
TASK: Determine whether the context contains the information stated in the correct answer.
Respond with "1" if yes, and "0" if no. Do not provide any explanation, just the number.)";

constexpr std::string_view kRagAnswer =
    R"(Use the following knowledge graph triples and text evidence to answer the question.
Triples: {triples_text}
Text Evidence: {text_block}
Question: {query} Answer:)";

constexpr std::string_view kJudgeAnswer =
    R"(You are a fact-checking assistant
Question: {question}
Expected answer: {expected}
Model's response: {response}
Does the model's response contain the information in the expected answer?
Respond with one word: Yes or No.)";

constexpr std::array<PromptEntry, 15> kPrompts{{
    {PromptId::ExtractEntities, "extract_entities", kExtractEntities},
    {PromptId::ExtractRelations, "extract_relations", kExtractRelations},
    {PromptId::ExtractEntitiesOriginal, "extract_entities_original", kExtractEntitiesOriginal},
    {PromptId::ExtractRelationsOriginal, "extract_relations_original", kExtractRelationsOriginal},
    {PromptId::ClusterEntities, "cluster_entities", kClusterEntities},
    {PromptId::ValidateEntityCluster, "validate_entity_cluster", kValidateEntityCluster},
    {PromptId::ClusterEdges, "cluster_edges", kClusterEdges},
    {PromptId::ValidateEdgeCluster, "validate_edge_cluster", kValidateEdgeCluster},
    {PromptId::LabelCluster, "label_cluster", kLabelCluster},
    {PromptId::AssignToCluster, "assign_to_cluster", kAssignToCluster},
    {PromptId::ResolveDuplicates, "resolve_duplicates", kResolveDuplicates},
    {PromptId::ExtractFacts, "extract_facts", kExtractFacts},
    {PromptId::JudgeFact, "judge_fact", kJudgeFact},
    {PromptId::RagAnswer, "rag_answer", kRagAnswer},
    {PromptId::JudgeAnswer, "judge_answer", kJudgeAnswer},
}};

constexpr std::array<PromptId, 15> kIds = [] {
  std::array<PromptId, 15> ids{};
  for (std::size_t i = 0; i < kPrompts.size(); ++i) ids[i] = kPrompts[i].id;
  return ids;
}();

const PromptEntry& entry(PromptId id) {
  for (const auto& e : kPrompts) {
    if (e.id == id) return e;
  }
  throw ValidationError("unknown prompt id");
}

constexpr std::array<std::string_view, 0> kNoSlots{};
constexpr std::array<std::string_view, 1> kItemTypeSlot{"item_type"};
constexpr std::array<std::string_view, 3> kRagSlots{"triples_text", "text_block", "query"};
constexpr std::array<std::string_view, 3> kJudgeAnswerSlots{"question", "expected", "response"};

}  // namespace

std::span<const PromptId> all_prompts() { return kIds; }

std::string_view prompt_name(PromptId id) { return entry(id).name; }

std::optional<PromptId> prompt_from_name(std::string_view name) {
  for (const auto& e : kPrompts) {
    if (e.name == name) return e.id;
  }
  return std::nullopt;
}

std::string_view prompt_template(PromptId id) { return entry(id).text; }

std::span<const std::string_view> prompt_slots(PromptId id) {
  switch (id) {
    case PromptId::LabelCluster:
    case PromptId::AssignToCluster:
    case PromptId::ResolveDuplicates:
      return kItemTypeSlot;
    case PromptId::RagAnswer:
      return kRagSlots;
    case PromptId::JudgeAnswer:
      return kJudgeAnswerSlots;
    default:
      return kNoSlots;
  }
}

std::string render_prompt(PromptId id, const std::map<std::string, std::string>& slots) {
  auto expected = prompt_slots(id);
  for (const auto& [name, value] : slots) {
    bool known = false;
    for (auto s : expected) known = known || s == name;
    if (!known) throw ValidationError("prompt " + std::string(prompt_name(id)) + " has no slot {" + name + "}");
  }
  std::string_view tpl = prompt_template(id);
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      std::size_t close = tpl.find('}', i);
      if (close != std::string_view::npos) {
        std::string name(tpl.substr(i + 1, close - i - 1));
        bool is_slot = false;
        for (auto s : expected) is_slot = is_slot || s == name;
        if (is_slot) {
          auto it = slots.find(name);
          if (it == slots.end()) {
            throw ValidationError("prompt " + std::string(prompt_name(id)) + " needs slot {" + name + "}");
          }
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tpl[i++]);
  }
  return out;
}

std::string prompt_hash(PromptId id) { return text::hex64(text::fnv1a64(prompt_template(id))); }

}  // namespace kggen
