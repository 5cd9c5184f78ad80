#include <gtest/gtest.h>

#include "cli_support.hpp"
#include "json.hpp"

using namespace kggen::testing;
using nlohmann::json;

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("frobnicate").code, 2);
  EXPECT_EQ(run_cli("stats /nonexistent/graph.json").code, 2);
  EXPECT_EQ(run_cli("cluster " + data_path("nine_three.json") + " -o /tmp/x.json --strategy bogus").code, 2);
  EXPECT_EQ(run_cli("--help").code, 0);
}

TEST(Cli, SchemaVersionMismatchIsAUsageError) {
  auto r = run_cli("stats " + data_path("future_version.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("schema version 2"), std::string::npos) << r.output;
}

TEST(Cli, StatsOnNineThree) {
  auto dir = fresh_dir("stats");
  auto r = run_cli("stats " + data_path("nine_three.json") + " -o " + (dir / "s.json").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("edge reuse 3.000"), std::string::npos) << r.output;
  json s = json::parse(slurp(dir / "s.json"));
  EXPECT_EQ(s["edge_reuse"].get<double>(), 3.0);
  fs::remove_all(dir);
}

TEST(Cli, GoldenPipelineIsByteStable) {
  auto a = fresh_dir("golden_a");
  auto b = fresh_dir("golden_b");
  auto ra = run_golden_pipeline(a, "-j 1");
  ASSERT_EQ(ra.code, 0) << ra.output;
  auto rb = run_golden_pipeline(b, "-j 4");
  ASSERT_EQ(rb.code, 0) << rb.output;
  for (const auto& name : golden_artifacts()) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(data_path("golden/" + name))) << name;
  }
  json manifest = json::parse(slurp(a / "resolved.json.manifest.json"));
  EXPECT_EQ(manifest["command"], "cluster");
  EXPECT_TRUE(manifest.contains("prompt_hashes"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, InjectedFaultsLeaveArtifactsUnchanged) {
  auto dir = fresh_dir("faults");
  auto r = run_golden_pipeline(dir, "", "--inject-faults 1");
  ASSERT_EQ(r.code, 0) << r.output;
  for (const auto& name : golden_artifacts()) {
    EXPECT_EQ(slurp(dir / name), slurp(data_path("golden/" + name))) << name;
  }
  // One malformed reply each for entity and relation extraction.
  EXPECT_EQ(json::parse(slurp(dir / "chunks.json.manifest.json"))["total_retries"], 2);
  EXPECT_GE(json::parse(slurp(dir / "resolved.json.manifest.json"))["total_retries"].get<int>(), 1);
  fs::remove_all(dir);
}

TEST(Cli, AllChunksFailingIsAPipelineFailure) {
  auto dir = fresh_dir("fail");
  auto r = run_cli("generate " + data_path("corpus/oslo.txt") + " -o " + (dir / "c.json").string() +
                   " --inject-faults 5 --max-retries 0");
  EXPECT_EQ(r.code, 1) << r.output;
  fs::remove_all(dir);
}

TEST(Cli, Mine1Scores) {
  auto dir = fresh_dir("mine1");
  const std::string fixture = data_path("article.json");
  auto r = run_cli("mine1 --fixture " + fixture + " --graph " + data_path("article_graph.json") + " -o " +
                   (dir / "full.json").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(json::parse(slurp(dir / "full.json"))["mean"].get<double>(), 100.0);
  r = run_cli("mine1 --fixture " + fixture + " --graph " + data_path("article_graph_partial.json") + " -o " +
              (dir / "partial.json").string() + " --histogram " + (dir / "h.csv").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(json::parse(slurp(dir / "partial.json"))["mean"].get<double>(), 60.0);
  EXPECT_EQ(slurp(dir / "h.csv"), "lower,upper,count\n60,70,1\n");
  fs::remove_all(dir);
}

TEST(Cli, Mine1MismatchedCountsIsUsageError) {
  auto r = run_cli("mine1 --fixture " + data_path("article.json") + " --graph " + data_path("article_graph.json") +
                   " --graph " + data_path("article_graph.json") + " -o /tmp/kggen_never.json");
  EXPECT_EQ(r.code, 2) << r.output;
}

TEST(Cli, Mine2OverGoldenGraph) {
  auto dir = fresh_dir("mine2");
  auto r = run_cli("mine2 --graph " + data_path("golden/graph.json") + " --qa " + data_path("qa.jsonl") + " -o " +
                   (dir / "r.json").string() + " --csv " + (dir / "r.csv").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(json::parse(slurp(dir / "r.json"))["accuracy"].get<double>(), 100.0);

  r = run_cli("mine2 --graph " + data_path("nine_three.json") + " --qa " + data_path("qa.jsonl") + " -o " +
              (dir / "x.json").string());
  EXPECT_EQ(r.code, 2) << r.output;  // no provenance
  fs::remove_all(dir);
}
