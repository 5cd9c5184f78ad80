#include "kggen/model.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "kggen/errors.hpp"
#include "kggen/text.hpp"

namespace kggen {

using nlohmann::json;

void ModelConfig::validate() const {
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (max_in_flight < 1) throw ConfigError("max in-flight requests must be >= 1");
  if (backend == BackendKind::Remote) {
    if (endpoint.empty()) throw ConfigError("remote backend requires an endpoint URL");
    if (api_key_env.empty()) throw ConfigError("remote backend requires an API key variable name");
  }
}

// ---------------------------------------------------------------------------
// Output parsing

std::optional<json> extract_json(std::string_view raw) {
  std::string body = text::trim(raw);
  if (body.rfind("```", 0) == 0) {
    auto first_newline = body.find('\n');
    auto fence_end = body.rfind("```");
    if (first_newline != std::string::npos && fence_end != std::string::npos && fence_end > first_newline) {
      body = text::trim(std::string_view(body).substr(first_newline + 1, fence_end - first_newline - 1));
    }
  }
  json parsed = json::parse(body, nullptr, false);
  if (!parsed.is_discarded()) return parsed;

  auto try_span = [&](char open, char close) -> std::optional<json> {
    auto begin = body.find(open);
    auto end = body.rfind(close);
    if (begin == std::string::npos || end == std::string::npos || end <= begin) return std::nullopt;
    json j = json::parse(std::string_view(body).substr(begin, end - begin + 1), nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
  };
  auto obj_pos = body.find('{');
  auto arr_pos = body.find('[');
  if (arr_pos != std::string::npos && (obj_pos == std::string::npos || arr_pos < obj_pos)) {
    if (auto j = try_span('[', ']')) return j;
    return try_span('{', '}');
  }
  if (auto j = try_span('{', '}')) return j;
  return try_span('[', ']');
}

namespace {

std::string strip_decoration(std::string_view raw) {
  std::string s = text::trim(raw);
  auto is_decoration = [](char c) {
    return c == '"' || c == '\'' || c == '`' || c == '.' || c == '!' || c == ',' || c == '*' ||
           std::isspace(static_cast<unsigned char>(c));
  };
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && is_decoration(s[begin])) ++begin;
  while (end > begin && is_decoration(s[end - 1])) --end;
  return s.substr(begin, end - begin);
}

}  // namespace

std::optional<bool> parse_binary_verdict(std::string_view raw) {
  std::string s = strip_decoration(raw);
  if (s == "1") return true;
  if (s == "0") return false;
  return std::nullopt;
}

std::optional<bool> parse_yes_no(std::string_view raw) {
  std::string s = text::simple_lowercase(strip_decoration(raw));
  if (s == "yes") return true;
  if (s == "no") return false;
  return std::nullopt;
}

std::string shortest_label(const std::vector<std::string>& items) {
  if (items.empty()) throw ValidationError("cannot pick a label from an empty list");
  return *std::min_element(items.begin(), items.end(), [](const std::string& a, const std::string& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
}

namespace {

// Returns the list payload of {"<key>": [...]} or a bare array.
std::optional<json> list_payload(const json& j, const char* key) {
  if (j.is_array()) return j;
  if (j.is_object()) {
    auto it = j.find(key);
    if (it != j.end() && it->is_array()) return *it;
  }
  return std::nullopt;
}

std::optional<std::vector<std::string>> string_list(const json& j, const char* key) {
  auto payload = list_payload(j, key);
  if (!payload) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& v : *payload) {
    if (!v.is_string()) return std::nullopt;
    out.push_back(v.get<std::string>());
  }
  return out;
}

// Keeps the members of `proposed` that were offered, in proposal order, once.
std::vector<std::string> keep_offered(const std::vector<std::string>& proposed,
                                      const std::vector<std::string>& offered, std::string_view what) {
  std::set<std::string> allowed(offered.begin(), offered.end());
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& p : proposed) {
    if (!allowed.count(p)) {
      spdlog::warn("{}: dropped label not among the offered items: \"{}\"", what, p);
      continue;
    }
    if (seen.insert(p).second) out.push_back(p);
  }
  return out;
}

std::string render_user_message(const json& inputs, std::string_view output_spec) {
  std::string msg;
  for (const auto& [key, value] : inputs.items()) {
    msg += key;
    msg += ": ";
    msg += value.is_string() ? value.get<std::string>() : value.dump();
    msg += "\n";
  }
  if (!output_spec.empty()) {
    msg += "\n";
    msg += output_spec;
  }
  return msg;
}

std::string item_type(LabelDomain domain) {
  return domain == LabelDomain::Entities ? "entities" : "edges";
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelGateway

ModelGateway::ModelGateway(std::shared_ptr<ModelBackend> backend, const ModelConfig& config)
    : backend_(std::move(backend)), config_(config) {
  if (!backend_) throw ConfigError("model gateway needs a backend");
  config_.validate();
}

void ModelGateway::acquire() {
  std::unique_lock lock(mutex_);
  slot_free_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
  ++in_flight_;
}

void ModelGateway::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  slot_free_.notify_one();
}

template <class T, class Parse>
T ModelGateway::call(PromptId id, std::map<std::string, std::string> slots, json inputs,
                     std::string_view output_spec, Parse parse) {
  for (const auto& [name, value] : slots) inputs[name] = value;
  StructuredRequest request{id, render_prompt(id, slots), inputs, {}};
  json visible = json::object();
  for (const auto& [key, value] : inputs.items()) {
    if (!slots.count(key)) visible[key] = value;
  }
  if (!visible.empty() || !output_spec.empty()) request.user_message = render_user_message(visible, output_spec);

  {
    std::lock_guard lock(mutex_);
    ++stats_[id].calls;
  }
  std::string last_raw;
  std::string last_problem;
  const int attempts = config_.max_retries + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::lock_guard lock(mutex_);
      ++stats_[id].retries;
      spdlog::warn("{}: retry {}/{} after {}", prompt_name(id), attempt, config_.max_retries, last_problem);
    }
    acquire();
    try {
      last_raw = backend_->complete(request);
      release();
    } catch (const BackendError& e) {
      release();
      last_problem = std::string("backend error: ") + e.what();
      continue;
    } catch (...) {
      release();
      throw;
    }
    std::optional<T> parsed = parse(last_raw);
    if (parsed) return std::move(*parsed);
    last_problem = "unparseable output";
  }
  {
    std::lock_guard lock(mutex_);
    ++stats_[id].failures;
  }
  throw ModelError(std::string(prompt_name(id)) + ": no usable output after " + std::to_string(attempts) +
                       " attempt(s) (" + last_problem + ")",
                   last_raw, attempts);
}

std::vector<std::string> ModelGateway::extract_entities(std::string_view text) {
  if (text::trim(text).empty()) throw ValidationError("extract_entities: text is empty");
  PromptId id = config_.prompt_set == PromptSet::Revised ? PromptId::ExtractEntities
                                                          : PromptId::ExtractEntitiesOriginal;
  auto raw = call<std::vector<std::string>>(
      id, {}, json{{"text", std::string(text)}}, R"(Respond with JSON only: {"entities": ["entity", ...]})",
      [](std::string_view out) -> std::optional<std::vector<std::string>> {
        auto j = extract_json(out);
        if (!j) return std::nullopt;
        return string_list(*j, "entities");
      });
  std::vector<std::string> entities;
  std::set<std::string> seen;
  for (auto& e : raw) {
    std::string label = text::trim(e);
    if (label.empty()) continue;
    if (seen.insert(label).second) entities.push_back(std::move(label));
  }
  return entities;
}

RelationExtraction ModelGateway::extract_relations(std::string_view text, const std::vector<std::string>& entities) {
  if (entities.empty()) throw ValidationError("extract_relations: entity list is empty");
  PromptId id = config_.prompt_set == PromptSet::Revised ? PromptId::ExtractRelations
                                                          : PromptId::ExtractRelationsOriginal;
  using Rows = std::vector<std::array<std::string, 3>>;
  Rows rows = call<Rows>(
      id, {}, json{{"text", std::string(text)}, {"entities", entities}},
      R"(Respond with JSON only: {"relations": [{"subject": "...", "predicate": "...", "object": "..."}, ...]})",
      [](std::string_view out) -> std::optional<Rows> {
        auto j = extract_json(out);
        if (!j) return std::nullopt;
        auto payload = list_payload(*j, "relations");
        if (!payload) return std::nullopt;
        Rows rows;
        for (const auto& r : *payload) {
          if (r.is_array() && r.size() == 3 && r[0].is_string() && r[1].is_string() && r[2].is_string()) {
            rows.push_back({r[0].get<std::string>(), r[1].get<std::string>(), r[2].get<std::string>()});
          } else if (r.is_object() && r.contains("subject") && r.contains("predicate") && r.contains("object") &&
                     r["subject"].is_string() && r["predicate"].is_string() && r["object"].is_string()) {
            rows.push_back({r["subject"].get<std::string>(), r["predicate"].get<std::string>(),
                            r["object"].get<std::string>()});
          } else {
            return std::nullopt;
          }
        }
        return rows;
      });

  RelationExtraction result;
  result.entities = entities;
  std::set<std::string> known(entities.begin(), entities.end());
  std::set<Triple> seen;
  for (auto& [s, p, o] : rows) {
    Triple t{text::trim(s), text::trim(p), text::trim(o), std::nullopt};
    if (t.subject.empty() || t.predicate.empty() || t.object.empty()) {
      spdlog::warn("extract_relations: dropped triple with an empty field");
      continue;
    }
    for (const std::string* endpoint : {&t.subject, &t.object}) {
      if (known.insert(*endpoint).second) {
        spdlog::warn("extract_relations: \"{}\" is not in the entity list; adding it", *endpoint);
        result.entities.push_back(*endpoint);
        result.added_entities.push_back(*endpoint);
      }
    }
    if (text::tokenize(t.predicate).size() > 3) {
      spdlog::debug("extract_relations: predicate longer than three words: \"{}\"", t.predicate);
    }
    if (seen.insert(t).second) result.triples.push_back(std::move(t));
  }
  return result;
}

std::vector<std::string> ModelGateway::propose_cluster(const std::vector<std::string>& items, LabelDomain domain,
                                                       std::string_view instruction) {
  if (items.empty()) throw ValidationError("propose_cluster: item list is empty");
  if (items.size() < 2) return {};
  PromptId id = domain == LabelDomain::Entities ? PromptId::ClusterEntities : PromptId::ClusterEdges;
  json inputs{{"items", items}};
  if (!instruction.empty()) inputs["instruction"] = std::string(instruction);
  auto proposed = call<std::vector<std::string>>(
      id, {}, inputs, R"(Respond with JSON only: {"cluster": ["item", ...]})",
      [](std::string_view out) -> std::optional<std::vector<std::string>> {
        auto j = extract_json(out);
        if (!j) return std::nullopt;
        return string_list(*j, "cluster");
      });
  return keep_offered(proposed, items, "propose_cluster");
}

std::vector<std::string> ModelGateway::validate_cluster(const std::vector<std::string>& items, LabelDomain domain) {
  if (items.size() < 2) return {};
  PromptId id = domain == LabelDomain::Entities ? PromptId::ValidateEntityCluster : PromptId::ValidateEdgeCluster;
  auto confirmed = call<std::vector<std::string>>(
      id, {}, json{{"items", items}}, R"(Respond with JSON only: {"cluster": ["item", ...]})",
      [](std::string_view out) -> std::optional<std::vector<std::string>> {
        auto j = extract_json(out);
        if (!j) return std::nullopt;
        return string_list(*j, "cluster");
      });
  auto kept = keep_offered(confirmed, items, "validate_cluster");
  if (kept.size() < 2) kept.clear();
  return kept;
}

std::string ModelGateway::label_cluster(const std::vector<std::string>& items, LabelDomain domain) {
  if (items.empty()) throw ValidationError("label_cluster: item list is empty");
  if (items.size() == 1) return items.front();
  try {
    return call<std::string>(
        PromptId::LabelCluster, {{"item_type", item_type(domain)}}, json{{"items", items}},
        R"(Respond with JSON only: {"label": "..."})", [](std::string_view out) -> std::optional<std::string> {
          auto j = extract_json(out);
          std::string label;
          if (j && j->is_object() && j->contains("label") && (*j)["label"].is_string()) {
            label = (*j)["label"].get<std::string>();
          } else if (j && j->is_string()) {
            label = j->get<std::string>();
          } else if (!j) {
            label = strip_decoration(out);
          }
          label = text::trim(label);
          if (label.empty() || label.find('\n') != std::string::npos) return std::nullopt;
          return label;
        });
  } catch (const ModelError& e) {
    std::string fallback = shortest_label(items);
    spdlog::warn("label_cluster: {}; using shortest member \"{}\"", e.what(), fallback);
    return fallback;
  }
}

std::map<std::string, std::string> ModelGateway::assign_to_clusters(
    const std::vector<std::string>& items, const std::map<std::string, std::set<std::string>>& clusters,
    LabelDomain domain) {
  if (items.empty() || clusters.empty()) return {};
  json cluster_json = json::object();
  for (const auto& [canonical, members] : clusters) cluster_json[canonical] = members;
  auto pairs = call<std::vector<std::pair<std::string, std::string>>>(
      PromptId::AssignToCluster, {{"item_type", item_type(domain)}},
      json{{"items", items}, {"clusters", cluster_json}},
      R"(Respond with JSON only: {"assignments": [{"item": "...", "cluster": "<cluster name>"}, ...]})",
      [](std::string_view out) -> std::optional<std::vector<std::pair<std::string, std::string>>> {
        auto j = extract_json(out);
        if (!j) return std::nullopt;
        auto payload = list_payload(*j, "assignments");
        if (!payload) return std::nullopt;
        std::vector<std::pair<std::string, std::string>> pairs;
        for (const auto& a : *payload) {
          if (!a.is_object() || !a.contains("item") || !a.contains("cluster") || !a["item"].is_string() ||
              !a["cluster"].is_string()) {
            return std::nullopt;
          }
          pairs.emplace_back(a["item"].get<std::string>(), a["cluster"].get<std::string>());
        }
        return pairs;
      });
  std::set<std::string> offered(items.begin(), items.end());
  std::map<std::string, std::string> out;
  for (auto& [item, cluster] : pairs) {
    if (!offered.count(item) || !clusters.count(cluster)) {
      spdlog::warn("assign_to_clusters: dropped assignment of \"{}\" to \"{}\"", item, cluster);
      continue;
    }
    out.emplace(item, cluster);
  }
  return out;
}

DuplicateMatch ModelGateway::find_duplicates(const std::string& item, const std::vector<std::string>& candidates,
                                             LabelDomain domain) {
  if (candidates.empty()) return {{}, item};
  auto parsed = call<std::pair<std::vector<std::string>, std::string>>(
      PromptId::ResolveDuplicates, {{"item_type", item_type(domain)}},
      json{{"item", item}, {"candidates", candidates}},
      R"(Respond with JSON only: {"duplicates": ["..."], "alias": "..."})",
      [](std::string_view out) -> std::optional<std::pair<std::vector<std::string>, std::string>> {
        auto j = extract_json(out);
        if (!j) return std::nullopt;
        auto dups = string_list(*j, "duplicates");
        if (!dups) return std::nullopt;
        std::string alias;
        if (j->is_object() && j->contains("alias")) {
          if (!(*j)["alias"].is_string()) return std::nullopt;
          alias = (*j)["alias"].get<std::string>();
        }
        return std::make_pair(std::move(*dups), text::trim(alias));
      });
  DuplicateMatch match;
  std::vector<std::string> offered;
  for (const auto& c : candidates) {
    if (c != item) offered.push_back(c);
  }
  match.duplicates = keep_offered(parsed.first, offered, "find_duplicates");
  match.alias = match.duplicates.empty() || parsed.second.empty() ? item : parsed.second;
  return match;
}

std::vector<std::string> ModelGateway::extract_facts(std::string_view article) {
  if (text::trim(article).empty()) throw ValidationError("extract_facts: article is empty");
  auto facts = call<std::vector<std::string>>(
      PromptId::ExtractFacts, {}, json{{"text", std::string(article)}}, {},
      [](std::string_view out) -> std::optional<std::vector<std::string>> {
        auto j = extract_json(out);
        if (!j) return std::nullopt;
        auto list = string_list(*j, "facts");
        if (!list || list->size() != 15) return std::nullopt;
        for (const auto& f : *list) {
          if (text::trim(f).empty()) return std::nullopt;
        }
        return list;
      });
  std::set<std::string> distinct(facts.begin(), facts.end());
  if (distinct.size() != facts.size()) spdlog::warn("extract_facts: the model repeated a fact");
  return facts;
}

bool ModelGateway::judge_fact(std::string_view fact, std::string_view context) {
  if (text::trim(fact).empty() || text::trim(context).empty()) {
    throw ValidationError("judge_fact: fact and context must be non-empty");
  }
  return call<bool>(PromptId::JudgeFact, {}, json{{"correct_answer", std::string(fact)}, {"context", std::string(context)}},
                    {}, [](std::string_view out) { return parse_binary_verdict(out); });
}

std::string ModelGateway::answer_question(std::string_view question, std::string_view triples_text,
                                          std::string_view text_block) {
  if (text::trim(triples_text).empty()) throw ValidationError("answer_question: no triples");
  return call<std::string>(PromptId::RagAnswer,
                           {{"triples_text", std::string(triples_text)},
                            {"text_block", std::string(text_block)},
                            {"query", std::string(question)}},
                           json::object(), {}, [](std::string_view out) -> std::optional<std::string> {
                             std::string answer = text::trim(out);
                             if (answer.empty()) return std::nullopt;
                             return answer;
                           });
}

bool ModelGateway::judge_answer(std::string_view question, std::string_view expected, std::string_view response) {
  return call<bool>(PromptId::JudgeAnswer,
                    {{"question", std::string(question)},
                     {"expected", std::string(expected)},
                     {"response", std::string(response)}},
                    json::object(), {}, [](std::string_view out) { return parse_yes_no(out); });
}

std::map<PromptId, PromptStats> ModelGateway::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

int ModelGateway::total_retries() const {
  std::lock_guard lock(mutex_);
  int total = 0;
  for (const auto& [id, s] : stats_) total += s.retries;
  return total;
}

// ---------------------------------------------------------------------------
// FaultInjectingBackend

FaultInjectingBackend::FaultInjectingBackend(std::shared_ptr<ModelBackend> inner, int faults, std::string payload)
    : inner_(std::move(inner)), faults_(faults), payload_(std::move(payload)) {}

std::string FaultInjectingBackend::complete(const StructuredRequest& request) {
  {
    std::lock_guard lock(mutex_);
    if (seen_[request.prompt]++ < faults_) {
      ++injected_;
      return payload_;
    }
  }
  return inner_->complete(request);
}

int FaultInjectingBackend::injected() const {
  std::lock_guard lock(mutex_);
  return injected_;
}

}  // namespace kggen
