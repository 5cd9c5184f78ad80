#include "kggen/mock_backend.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "kggen/errors.hpp"
#include "kggen/text.hpp"

namespace kggen {

using nlohmann::json;

namespace {

std::string singularize(std::string token) {
  auto ends_with = [&](std::string_view suffix) {
    return token.size() >= suffix.size() && token.compare(token.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (token.size() > 4 && ends_with("ies")) return token.substr(0, token.size() - 3) + "y";
  if (token.size() > 3 && ends_with("s") && !ends_with("ss")) return token.substr(0, token.size() - 1);
  return token;
}

std::set<std::string> key_tokens(std::string_view label) {
  std::set<std::string> out;
  for (auto& t : text::tokenize(label)) out.insert(singularize(std::move(t)));
  return out;
}

std::vector<std::string> strings_of(const json& j) {
  std::vector<std::string> out;
  if (!j.is_array()) return out;
  for (const auto& v : j) {
    if (v.is_string()) out.push_back(v.get<std::string>());
  }
  return out;
}

std::string input_string(const json& inputs, const char* key) {
  auto it = inputs.find(key);
  return it != inputs.end() && it->is_string() ? it->get<std::string>() : std::string();
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    lines.emplace_back(s.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < s.size(); ++i) {
    current.push_back(s[i]);
    bool terminal = s[i] == '.' || s[i] == '!' || s[i] == '?';
    bool boundary = i + 1 == s.size() || s[i + 1] == ' ' || s[i + 1] == '\n' || s[i + 1] == '\t';
    if (terminal && boundary) {
      std::string sentence = text::collapse_whitespace(current);
      if (!sentence.empty()) out.push_back(std::move(sentence));
      current.clear();
    }
  }
  std::string rest = text::collapse_whitespace(current);
  if (!rest.empty()) out.push_back(std::move(rest));
  return out;
}

}  // namespace

std::string duplicate_key(std::string_view label) {
  std::string key;
  for (const auto& t : key_tokens(label)) {
    if (!key.empty()) key.push_back(' ');
    key += t;
  }
  return key;
}

bool contains_token_sequence(std::string_view haystack, std::string_view needle) {
  auto hay = text::tokenize(haystack);
  auto pin = text::tokenize(needle);
  if (pin.empty()) return false;
  return std::search(hay.begin(), hay.end(), pin.begin(), pin.end()) != hay.end();
}

bool MockBackend::duplicates(const std::string& a, const std::string& b) const {
  auto ka = key_tokens(a);
  auto kb = key_tokens(b);
  if (ka.empty() || kb.empty()) return false;
  if (options_.duplicate_rule == DuplicateRule::SameTokenSet) return ka == kb;
  return std::includes(ka.begin(), ka.end(), kb.begin(), kb.end()) ||
         std::includes(kb.begin(), kb.end(), ka.begin(), ka.end());
}

std::string MockBackend::script_key(PromptId id, const json& inputs) {
  return std::string(prompt_name(id)) + ":" + text::hex64(text::fnv1a64(inputs.dump()));
}

void MockBackend::script(PromptId id, const json& inputs, std::string response) {
  script_[script_key(id, inputs)] = std::move(response);
}

void MockBackend::load_script(const json& doc) {
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw ConfigError("mock script must be an object with an \"entries\" array");
  }
  for (const auto& e : doc["entries"]) {
    if (!e.is_object() || !e.contains("prompt") || !e.contains("inputs") || !e.contains("response")) {
      throw ConfigError("mock script entry needs \"prompt\", \"inputs\" and \"response\"");
    }
    auto id = prompt_from_name(e["prompt"].get<std::string>());
    if (!id) throw ConfigError("mock script names an unknown prompt: " + e["prompt"].get<std::string>());
    const json& response = e["response"];
    script(*id, e["inputs"], response.is_string() ? response.get<std::string>() : response.dump());
  }
}

void MockBackend::load_script_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read mock script " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  json doc = json::parse(ss.str(), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("mock script is not valid JSON: " + path);
  load_script(doc);
}

std::string MockBackend::complete(const StructuredRequest& request) {
  auto it = script_.find(script_key(request.prompt, request.inputs));
  if (it != script_.end()) return it->second;
  return fallback(request);
}

std::string MockBackend::fallback(const StructuredRequest& request) const {
  const json& in = request.inputs;
  switch (request.prompt) {
    case PromptId::ExtractEntities:
    case PromptId::ExtractEntitiesOriginal:
      spdlog::debug("mock: no scripted entities for this text");
      return R"({"entities": []})";
    case PromptId::ExtractRelations:
    case PromptId::ExtractRelationsOriginal:
      return R"({"relations": []})";

    case PromptId::ClusterEntities:
    case PromptId::ClusterEdges: {
      auto items = strings_of(in.value("items", json::array()));
      for (std::size_t i = 0; i < items.size(); ++i) {
        std::vector<std::string> group{items[i]};
        for (std::size_t j = i + 1; j < items.size(); ++j) {
          if (duplicates(items[i], items[j])) group.push_back(items[j]);
        }
        if (group.size() >= 2) return json{{"cluster", group}}.dump();
      }
      return R"({"cluster": []})";
    }
    case PromptId::ValidateEntityCluster:
    case PromptId::ValidateEdgeCluster:
      return json{{"cluster", in.value("items", json::array())}}.dump();
    case PromptId::LabelCluster: {
      auto items = strings_of(in.value("items", json::array()));
      if (items.empty()) return "{}";
      return json{{"label", shortest_label(items)}}.dump();
    }
    case PromptId::AssignToCluster: {
      json assignments = json::array();
      const json clusters = in.value("clusters", json::object());
      for (const auto& item : strings_of(in.value("items", json::array()))) {
        for (const auto& [canonical, members] : clusters.items()) {
          auto list = strings_of(members);
          bool match = std::any_of(list.begin(), list.end(), [&](const std::string& m) { return duplicates(item, m); });
          if (match) {
            assignments.push_back({{"item", item}, {"cluster", canonical}});
            break;
          }
        }
      }
      return json{{"assignments", assignments}}.dump();
    }
    case PromptId::ResolveDuplicates: {
      std::string item = input_string(in, "item");
      std::vector<std::string> dups;
      for (const auto& c : strings_of(in.value("candidates", json::array()))) {
        if (c != item && duplicates(item, c)) dups.push_back(c);
      }
      std::vector<std::string> group = dups;
      group.push_back(item);
      std::string alias = dups.empty() ? item : text::simple_lowercase(shortest_label(group));
      return json{{"duplicates", dups}, {"alias", alias}}.dump();
    }

    case PromptId::ExtractFacts: {
      auto sentences = split_sentences(input_string(in, "text"));
      if (sentences.size() > 15) sentences.resize(15);
      return json(sentences).dump();
    }
    case PromptId::JudgeFact: {
      std::string fact = input_string(in, "correct_answer");
      for (const auto& line : split_lines(input_string(in, "context"))) {
        if (contains_token_sequence(line, fact)) return "1";
      }
      return "0";
    }
    case PromptId::RagAnswer:
      return input_string(in, "triples_text") + "\n" + input_string(in, "text_block");
    case PromptId::JudgeAnswer:
      return contains_token_sequence(input_string(in, "response"), input_string(in, "expected")) ? "Yes" : "No";
  }
  return {};
}

}  // namespace kggen
