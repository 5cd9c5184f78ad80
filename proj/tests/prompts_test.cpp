#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "kggen/errors.hpp"
#include "kggen/prompts.hpp"

using namespace kggen;

namespace {

std::string fixture(PromptId id) {
  std::ifstream in(std::string(KGGEN_PROMPT_DIR) + "/" + std::string(prompt_name(id)) + ".txt", std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string substitute(std::string text, const std::map<std::string, std::string>& slots) {
  for (const auto& [name, value] : slots) {
    const std::string marker = "{" + name + "}";
    for (auto pos = text.find(marker); pos != std::string::npos; pos = text.find(marker, pos + value.size())) {
      text.replace(pos, marker.size(), value);
    }
  }
  return text;
}

}  // namespace

TEST(Prompts, EveryIdHasAFixture) {
  EXPECT_EQ(all_prompts().size(), 15u);
  for (PromptId id : all_prompts()) {
    EXPECT_FALSE(fixture(id).empty()) << prompt_name(id);
    EXPECT_EQ(prompt_from_name(prompt_name(id)), id);
  }
  EXPECT_FALSE(prompt_from_name("nope").has_value());
}

TEST(Prompts, TemplatesMatchFixturesByteForByte) {
  for (PromptId id : all_prompts()) EXPECT_EQ(std::string(prompt_template(id)), fixture(id)) << prompt_name(id);
}

TEST(Prompts, RenderedPromptsMatchFixtures) {
  for (PromptId id : all_prompts()) {
    std::map<std::string, std::string> slots;
    int n = 0;
    for (auto s : prompt_slots(id)) slots[std::string(s)] = "<value " + std::to_string(n++) + ">";
    EXPECT_EQ(render_prompt(id, slots), substitute(fixture(id), slots)) << prompt_name(id);
  }
}

TEST(Prompts, SlotErrors) {
  EXPECT_THROW(render_prompt(PromptId::RagAnswer, {{"triples_text", "t"}}), ValidationError);
  EXPECT_THROW(render_prompt(PromptId::JudgeFact, {{"bogus", "x"}}), ValidationError);
}

TEST(Prompts, LiteralBracesSurvive) {
  // Entity extraction has no slots; any braces in the text are literal.
  EXPECT_EQ(render_prompt(PromptId::ExtractEntities), std::string(prompt_template(PromptId::ExtractEntities)));
}

TEST(Prompts, HashesAreStableAndDistinct) {
  std::set<std::string> seen;
  for (PromptId id : all_prompts()) {
    EXPECT_EQ(prompt_hash(id), prompt_hash(id));
    EXPECT_TRUE(seen.insert(prompt_hash(id)).second);
  }
}
