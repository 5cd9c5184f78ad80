#pragma once

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kggen/graph.hpp"
#include "kggen/prompts.hpp"

namespace kggen {

enum class BackendKind { Remote, Mock };
enum class PromptSet { Revised, Original };

struct ModelConfig {
  BackendKind backend = BackendKind::Mock;
  std::string model_name = "mock";
  // Full chat-completion URL, e.g. https://api.openai.com/v1/chat/completions
  std::string endpoint;
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 3;
  double temperature = 0.0;
  int max_in_flight = 4;
  PromptSet prompt_set = PromptSet::Revised;

  // Throws ConfigError.
  void validate() const;
};

// One fully rendered model call. instruction is the template with its slots
// filled; inputs holds every value the call depends on (slot values included)
// and user_message is the chat rendering of the non-slot inputs.
struct StructuredRequest {
  PromptId prompt;
  std::string instruction;
  nlohmann::json inputs;
  std::string user_message;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  // Raw model text. Throws BackendError on transport failure.
  virtual std::string complete(const StructuredRequest& request) = 0;
};

struct PromptStats {
  int calls = 0;
  int retries = 0;
  int failures = 0;
};

struct RelationExtraction {
  std::vector<Triple> triples;
  // Input entities followed by any endpoint the model introduced.
  std::vector<std::string> entities;
  std::vector<std::string> added_entities;
};

struct DuplicateMatch {
  std::vector<std::string> duplicates;
  std::string alias;
};

// Lenient JSON recovery from model text: strips code fences and falls back to
// the outermost {...} or [...] span.
std::optional<nlohmann::json> extract_json(std::string_view raw);

// "1" / "0", tolerating quotes, whitespace and trailing punctuation.
std::optional<bool> parse_binary_verdict(std::string_view raw);

// One-word yes/no, case-insensitive, tolerating punctuation ("YES." -> yes).
std::optional<bool> parse_yes_no(std::string_view raw);

// Shortest label, ties broken by byte order. items must be non-empty.
std::string shortest_label(const std::vector<std::string>& items);

// Every model interaction of the pipeline goes through here: template
// rendering, output parsing, retry, and the anti-hallucination filters that
// keep list outputs inside the offered candidates.
class ModelGateway {
 public:
  ModelGateway(std::shared_ptr<ModelBackend> backend, const ModelConfig& config);

  std::vector<std::string> extract_entities(std::string_view text);
  RelationExtraction extract_relations(std::string_view text, const std::vector<std::string>& entities);

  std::vector<std::string> propose_cluster(const std::vector<std::string>& items, LabelDomain domain,
                                           std::string_view instruction = {});
  std::vector<std::string> validate_cluster(const std::vector<std::string>& items, LabelDomain domain);
  std::string label_cluster(const std::vector<std::string>& items, LabelDomain domain);
  // item -> canonical of the cluster it joins; unassigned items are absent.
  std::map<std::string, std::string> assign_to_clusters(
      const std::vector<std::string>& items,
      const std::map<std::string, std::set<std::string>>& clusters, LabelDomain domain);
  DuplicateMatch find_duplicates(const std::string& item, const std::vector<std::string>& candidates,
                                 LabelDomain domain);

  std::vector<std::string> extract_facts(std::string_view article);
  bool judge_fact(std::string_view fact, std::string_view context);
  std::string answer_question(std::string_view question, std::string_view triples_text,
                              std::string_view text_block);
  bool judge_answer(std::string_view question, std::string_view expected, std::string_view response);

  std::map<PromptId, PromptStats> stats() const;
  int total_retries() const;
  const ModelConfig& config() const { return config_; }

 private:
  template <class T, class Parse>
  T call(PromptId id, std::map<std::string, std::string> slots, nlohmann::json inputs,
         std::string_view output_spec, Parse parse);

  void acquire();
  void release();

  std::shared_ptr<ModelBackend> backend_;
  ModelConfig config_;

  mutable std::mutex mutex_;
  std::condition_variable slot_free_;
  int in_flight_ = 0;
  std::map<PromptId, PromptStats> stats_;
};

// Wraps a backend and returns a malformed reply for the first `faults` calls
// of every prompt id before delegating.
class FaultInjectingBackend : public ModelBackend {
 public:
  FaultInjectingBackend(std::shared_ptr<ModelBackend> inner, int faults = 1, std::string payload = "  ");
  std::string complete(const StructuredRequest& request) override;
  int injected() const;

 private:
  std::shared_ptr<ModelBackend> inner_;
  int faults_;
  std::string payload_;
  mutable std::mutex mutex_;
  std::map<PromptId, int> seen_;
  int injected_ = 0;
};

// OpenAI-compatible chat-completion client. The template is sent as a single
// system message, the rendered inputs as one user message.
class RemoteChatBackend : public ModelBackend {
 public:
  explicit RemoteChatBackend(const ModelConfig& config);
  std::string complete(const StructuredRequest& request) override;

 private:
  ModelConfig config_;
  std::string api_key_;
};

std::shared_ptr<ModelBackend> make_backend(const ModelConfig& config,
                                           const std::string& mock_script_path = {});

// Splits http(s)://host[:port]/path into the client base and the path.
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace kggen
