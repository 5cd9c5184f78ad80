#include "commands.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kggen/aggregator.hpp"
#include "kggen/bench.hpp"
#include "kggen/embedder.hpp"
#include "kggen/errors.hpp"
#include "kggen/extractor.hpp"
#include "kggen/graph.hpp"
#include "kggen/mock_backend.hpp"
#include "kggen/model.hpp"
#include "kggen/prompts.hpp"
#include "kggen/resolver.hpp"

namespace kggen::cli {

using nlohmann::json;

namespace {

struct ModelOptions {
  std::string backend = "mock";
  std::string model = "mock";
  std::string endpoint;
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 3;
  std::string prompt_set = "revised";
  std::string mock_script;
  std::string mock_duplicates = "token-set";
  int inject_faults = 0;
};

struct EmbedOptions {
  std::string kind = "hashing";
  std::size_t dim = 0;  // 0: 64 for hashing, learned from the service for remote
  std::string endpoint;
  std::string model = "all-MiniLM-L6-v2";
  std::string api_key_env;
};

struct Options {
  int jobs = 4;
  std::string log_level = "warn";
  ModelOptions model;
  EmbedOptions embed;

  std::vector<std::string> inputs;
  std::string output;
  std::size_t max_chars = kDefaultMaxChunkChars;
  bool no_provenance = false;

  std::string strategy = "hybrid";
  ResolutionParams resolution;

  std::string pre;
  std::string post;

  std::vector<std::string> fixtures;
  std::vector<std::string> graphs;
  std::string qa;
  std::string csv;
  std::string histogram;
  BenchParams bench;
};

void add_model_options(CLI::App* cmd, ModelOptions& m) {
  cmd->add_option("--backend", m.backend, "Model backend")->check(CLI::IsMember({"mock", "remote"}));
  cmd->add_option("--model", m.model, "Model name sent to the backend");
  cmd->add_option("--endpoint", m.endpoint, "Chat-completion URL for the remote backend");
  cmd->add_option("--api-key-env", m.api_key_env, "Environment variable holding the API key");
  cmd->add_option("--max-retries", m.max_retries, "Retries after a malformed reply")->check(CLI::NonNegativeNumber);
  cmd->add_option("--prompt-set", m.prompt_set, "Extraction prompt generation")
      ->check(CLI::IsMember({"revised", "original"}));
  cmd->add_option("--mock-script", m.mock_script, "Scripted responses for the mock backend")
      ->check(CLI::ExistingFile);
  cmd->add_option("--mock-duplicates", m.mock_duplicates, "Mock duplicate rule")
      ->check(CLI::IsMember({"token-set", "token-subset"}));
  cmd->add_option("--inject-faults", m.inject_faults, "Malformed replies injected per prompt (testing)")
      ->check(CLI::NonNegativeNumber);
}

void add_embed_options(CLI::App* cmd, EmbedOptions& e) {
  cmd->add_option("--embedder", e.kind, "Embedding backend")->check(CLI::IsMember({"hashing", "remote"}));
  cmd->add_option("--embed-dim", e.dim, "Embedding dimension (hashing default 64; remote default: as returned)");
  cmd->add_option("--embed-endpoint", e.endpoint, "Embeddings URL for the remote embedder");
  cmd->add_option("--embed-model", e.model, "Remote embedding model");
  cmd->add_option("--embed-api-key-env", e.api_key_env, "Environment variable holding the embedding API key");
}

ModelConfig model_config(const Options& o) {
  ModelConfig c;
  c.backend = o.model.backend == "remote" ? BackendKind::Remote : BackendKind::Mock;
  c.model_name = o.model.model;
  c.endpoint = o.model.endpoint;
  c.api_key_env = o.model.api_key_env;
  c.max_retries = o.model.max_retries;
  c.max_in_flight = std::max(o.jobs, 1);
  c.prompt_set = o.model.prompt_set == "original" ? PromptSet::Original : PromptSet::Revised;
  return c;
}

struct ModelHandle {
  std::shared_ptr<FaultInjectingBackend> faults;
  std::unique_ptr<ModelGateway> gateway;
};

ModelHandle make_gateway(const Options& o) {
  ModelConfig config = model_config(o);
  std::shared_ptr<ModelBackend> backend;
  if (config.backend == BackendKind::Mock) {
    config.validate();
    MockBackend::Options mo;
    mo.duplicate_rule = o.model.mock_duplicates == "token-subset" ? MockBackend::DuplicateRule::TokenSubset
                                                                  : MockBackend::DuplicateRule::SameTokenSet;
    auto mock = std::make_shared<MockBackend>(mo);
    if (!o.model.mock_script.empty()) mock->load_script_file(o.model.mock_script);
    backend = mock;
  } else {
    backend = make_backend(config);
  }
  ModelHandle h;
  if (o.model.inject_faults > 0) {
    h.faults = std::make_shared<FaultInjectingBackend>(backend, o.model.inject_faults);
    backend = h.faults;
  }
  h.gateway = std::make_unique<ModelGateway>(backend, config);
  return h;
}

std::unique_ptr<Embedder> make_embedder(const Options& o) {
  EmbedderConfig c;
  c.kind = o.embed.kind == "remote" ? EmbedderKind::Remote : EmbedderKind::Hashing;
  c.dim = o.embed.dim == 0 && c.kind == EmbedderKind::Hashing ? 64 : o.embed.dim;
  c.endpoint = o.embed.endpoint;
  c.model_name = o.embed.model;
  c.api_key_env = o.embed.api_key_env;
  return kggen::make_embedder(c);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << content;
  if (!out) throw InputError("write failed: " + path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), e.byte);
  }
}

using Clock = std::chrono::steady_clock;

// Provenance kept beside the artifact so the artifact itself stays byte-stable.
void write_manifest(const std::string& artifact, const std::string& command, const Options& o,
                    const ModelGateway* gateway, Clock::time_point started) {
  json prompts = json::object();
  for (PromptId id : all_prompts()) prompts[std::string(prompt_name(id))] = prompt_hash(id);
  json m = {{"format", "kggen-run-manifest"},
            {"version", kFormatVersion},
            {"command", command},
            {"artifact", std::filesystem::path(artifact).filename().string()},
            {"prompt_set_version", std::string(kPromptSetVersion)},
            {"prompt_hashes", prompts},
            {"seconds", std::chrono::duration<double>(Clock::now() - started).count()}};
  if (gateway) {
    m["model"] = {{"backend", o.model.backend}, {"name", o.model.model}, {"prompt_set", o.model.prompt_set}};
    json calls = json::object();
    for (const auto& [id, s] : gateway->stats()) {
      calls[std::string(prompt_name(id))] = {{"calls", s.calls}, {"retries", s.retries}, {"failures", s.failures}};
    }
    m["calls"] = calls;
    m["total_retries"] = gateway->total_retries();
  }
  write_text(artifact + ".manifest.json", dump(m));
}

void log_retries(const ModelGateway& gateway) {
  for (const auto& [id, s] : gateway.stats()) {
    if (s.retries > 0 || s.failures > 0) {
      spdlog::info("{}: {} call(s), {} retr{}, {} failure(s)", prompt_name(id), s.calls, s.retries,
                   s.retries == 1 ? "y" : "ies", s.failures);
    }
  }
}

// ---------------------------------------------------------------------------

int cmd_generate(const Options& o) {
  const auto started = Clock::now();
  std::vector<SourceChunk> chunks;
  for (const auto& path : o.inputs) {
    for (const auto& doc : read_documents(path)) {
      auto c = chunk_text(doc, o.max_chars);
      chunks.insert(chunks.end(), c.begin(), c.end());
    }
  }
  auto model = make_gateway(o);
  GenerateResult result;
  if (chunks.empty()) {
    spdlog::warn("no text to extract from; writing an empty chunk-graphs file");
  } else {
    result = generate(chunks, *model.gateway, o.jobs);
  }
  log_retries(*model.gateway);
  write_text(o.output, dump(chunk_graphs_to_json(result)));
  write_manifest(o.output, "generate", o, model.gateway.get(), started);
  std::cout << "chunks: " << result.chunks.size() << ", extracted: " << result.graphs.size()
            << ", failed: " << result.failures.size() << "\n";
  return kOk;
}

int cmd_aggregate(const Options& o) {
  std::vector<ChunkGraph> chunk_graphs;
  std::vector<SourceChunk> chunks;
  std::vector<KnowledgeGraph> graphs;
  for (const auto& path : o.inputs) {
    json doc = read_json(path);
    const std::string format = doc.is_object() ? doc.value("format", "") : "";
    if (format == "kggen-chunk-graphs") {
      GenerateResult r = chunk_graphs_from_json(doc);
      chunk_graphs.insert(chunk_graphs.end(), r.graphs.begin(), r.graphs.end());
      chunks.insert(chunks.end(), r.chunks.begin(), r.chunks.end());
    } else {
      graphs.push_back(read_graph_file(path));
    }
  }
  graphs.push_back(aggregate(chunk_graphs, chunks));
  KnowledgeGraph merged = aggregate(graphs);
  if (o.no_provenance) {
    KnowledgeGraph bare;
    for (const auto& e : merged.entities()) bare.add_entity(e);
    for (const auto& r : merged.relations()) bare.add_relation(r);
    for (const auto& t : merged.triples()) bare.add_triple({t.subject, t.predicate, t.object, std::nullopt});
    merged = std::move(bare);
  }
  write_graph_file(o.output, merged);
  std::cout << "entities: " << merged.entities().size() << ", relations: " << merged.relations().size()
            << ", triples: " << merged.triples().size() << "\n";
  return kOk;
}

int cmd_cluster(Options o) {
  const auto started = Clock::now();
  o.resolution.strategy = o.strategy == "iterative" ? ResolutionStrategy::Iterative : ResolutionStrategy::Hybrid;
  o.resolution.jobs = o.jobs;
  o.resolution.validate();
  KnowledgeGraph graph = read_graph_file(o.inputs.front());
  auto model = make_gateway(o);
  auto embedder = make_embedder(o);
  Resolution r = resolve(graph, o.resolution, *model.gateway, *embedder);
  log_retries(*model.gateway);
  write_graph_file(o.output, r.graph);
  write_manifest(o.output, "cluster", o, model.gateway.get(), started);
  std::cout << render_stats(compute_stats(graph, r.graph));
  return kOk;
}

int cmd_stats(const Options& o) {
  KnowledgeGraph post = read_graph_file(o.post);
  KnowledgeGraph pre = o.pre.empty() ? post : read_graph_file(o.pre);
  GraphStats stats = compute_stats(pre, post);
  std::cout << render_stats(stats);
  if (!o.output.empty()) write_text(o.output, dump(stats_to_json(stats)));
  return kOk;
}

int cmd_mine1(const Options& o) {
  const auto started = Clock::now();
  if (o.fixtures.size() != o.graphs.size()) {
    throw ValidationError("--fixture and --graph must be given the same number of times");
  }
  std::vector<ArticleRun> runs;
  for (std::size_t i = 0; i < o.fixtures.size(); ++i) {
    runs.push_back({read_fixture(o.fixtures[i]), read_graph_file(o.graphs[i])});
  }
  BenchParams params = o.bench;
  params.jobs = o.jobs;
  auto model = make_gateway(o);
  auto embedder = make_embedder(o);
  EvalReport report = mine1_evaluate(runs, params, *model.gateway, *embedder);
  log_retries(*model.gateway);
  write_text(o.output, dump(report.to_json()));
  if (!o.csv.empty()) write_text(o.csv, report.to_csv());
  if (!o.histogram.empty()) {
    std::vector<double> scores;
    for (const auto& a : report.articles) scores.push_back(a.score);
    write_text(o.histogram, histogram_csv(score_histogram(scores)));
  }
  write_manifest(o.output, "mine1", o, model.gateway.get(), started);
  for (const auto& a : report.articles) std::cout << a.id << ": " << a.score << "\n";
  std::cout << "mean: " << report.mean << "\n";
  return kOk;
}

int cmd_mine2(const Options& o) {
  const auto started = Clock::now();
  KnowledgeGraph graph = read_graph_file(o.graphs.front());
  auto qa = read_qa_pairs(o.qa);
  BenchParams params = o.bench;
  params.jobs = o.jobs;
  auto model = make_gateway(o);
  auto embedder = make_embedder(o);
  Mine2Report report = mine2_eval(graph, qa, params, *model.gateway, *embedder);
  log_retries(*model.gateway);
  write_text(o.output, dump(report.to_json()));
  if (!o.csv.empty()) write_text(o.csv, report.to_csv());
  write_manifest(o.output, "mine2", o, model.gateway.get(), started);
  std::cout << "accuracy: " << report.accuracy << "\n";
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  Options o;
  CLI::App app{"kggen: knowledge graph extraction, resolution and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value configuration file; command-line flags take precedence");
  app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error, off");
  app.add_option("-j,--jobs", o.jobs, "Concurrent model calls")->check(CLI::PositiveNumber);

  auto* generate_cmd = app.add_subcommand("generate", "Extract per-chunk graphs from text files");
  generate_cmd->add_option("inputs", o.inputs, "Text files (.txt, or .jsonl with id/text)")->required();
  generate_cmd->add_option("-o,--output", o.output, "Chunk-graphs file")->required();
  generate_cmd->add_option("--max-chars", o.max_chars, "Chunk size in bytes")
      ->check(CLI::Range(kMinChunkChars, std::size_t{1} << 30));
  add_model_options(generate_cmd, o.model);

  auto* aggregate_cmd = app.add_subcommand("aggregate", "Merge chunk graphs and graphs into one graph");
  aggregate_cmd->add_option("inputs", o.inputs, "Chunk-graphs or graph files")->required();
  aggregate_cmd->add_option("-o,--output", o.output, "Graph file")->required();
  aggregate_cmd->add_flag("--no-provenance", o.no_provenance, "Drop chunk provenance from triples");

  auto* cluster_cmd = app.add_subcommand("cluster", "Resolve duplicate entities and edges");
  cluster_cmd->add_option("input", o.inputs, "Graph file")->required()->expected(1);
  cluster_cmd->add_option("-o,--output", o.output, "Resolved graph file")->required();
  cluster_cmd->add_option("--strategy", o.strategy, "iterative or hybrid")
      ->check(CLI::IsMember({"iterative", "hybrid"}));
  cluster_cmd->add_option("--n", o.resolution.patience, "Iterative: failures tolerated in a row");
  cluster_cmd->add_option("--b", o.resolution.batch_size, "Iterative: residual batch size");
  cluster_cmd->add_option("--cluster-size", o.resolution.cluster_size, "Hybrid: k-means cluster size");
  cluster_cmd->add_option("--k", o.resolution.top_k, "Hybrid: candidates per item");
  cluster_cmd->add_option("--instruction", o.resolution.instruction, "Iterative: extra clustering guidance");
  cluster_cmd->add_option("--seed", o.resolution.seed, "k-means seed");
  add_model_options(cluster_cmd, o.model);
  add_embed_options(cluster_cmd, o.embed);

  auto* stats_cmd = app.add_subcommand("stats", "Print graph statistics");
  stats_cmd->add_option("graph", o.post, "Graph file (post-resolution)")->required();
  stats_cmd->add_option("--pre", o.pre, "Graph before resolution, for de-duplication ratios");
  stats_cmd->add_option("-o,--output", o.output, "Also write the statistics as JSON");

  auto* mine1_cmd = app.add_subcommand("mine1", "Fact-retention benchmark");
  mine1_cmd->add_option("--fixture", o.fixtures, "Article fixture JSON (repeat per article)")->required();
  mine1_cmd->add_option("--graph", o.graphs, "Graph for the matching --fixture")->required();
  mine1_cmd->add_option("--node-top-k", o.bench.node_top_k, "Seed nodes per fact")->check(CLI::PositiveNumber);
  mine1_cmd->add_option("-o,--output", o.output, "Report JSON")->required();
  mine1_cmd->add_option("--csv", o.csv, "Report CSV");
  mine1_cmd->add_option("--histogram", o.histogram, "Score histogram CSV");
  add_model_options(mine1_cmd, o.model);
  add_embed_options(mine1_cmd, o.embed);

  auto* mine2_cmd = app.add_subcommand("mine2", "Question-answering benchmark over a graph with provenance");
  mine2_cmd->add_option("--graph", o.graphs, "Graph file")->required()->expected(1);
  mine2_cmd->add_option("--qa", o.qa, "Question/answer JSON lines")->required();
  mine2_cmd->add_option("-o,--output", o.output, "Report JSON")->required();
  mine2_cmd->add_option("--csv", o.csv, "Report CSV");
  add_model_options(mine2_cmd, o.model);
  add_embed_options(mine2_cmd, o.embed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  auto logger = spdlog::stderr_color_mt("kggen");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(o.log_level));

  try {
    if (*generate_cmd) return cmd_generate(o);
    if (*aggregate_cmd) return cmd_aggregate(o);
    if (*cluster_cmd) return cmd_cluster(o);
    if (*stats_cmd) return cmd_stats(o);
    if (*mine1_cmd) return cmd_mine1(o);
    if (*mine2_cmd) return cmd_mine2(o);
  } catch (const SchemaVersionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what();
    if (e.offset() != std::string::npos) std::cerr << " (byte " << e.offset() << ")";
    std::cerr << "\n";
    return kUsageError;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return kPipelineFailure;
  }
  return kUsageError;
}

}  // namespace kggen::cli
