#pragma once

// Helpers for driving the kggen binary from tests.

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace kggen::testing {

namespace fs = std::filesystem;

struct CliResult {
  int code = -1;
  std::string output;  // stdout and stderr
};

inline CliResult run_cli(const std::string& args) {
  std::string cmd = std::string("'") + KGGEN_CLI + "' " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string data_path(const std::string& name) { return std::string(KGGEN_TEST_DATA) + "/" + name; }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("kggen_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Artifacts compared byte-for-byte against tests/data/golden.
inline const std::vector<std::string>& golden_artifacts() {
  static const std::vector<std::string> names = {"chunks.json", "graph.json", "resolved.json", "stats.json"};
  return names;
}

// generate -> aggregate -> cluster (hybrid) -> stats over the three-document
// corpus with the scripted mock. Returns the first non-zero exit code.
// model_flags go to the two steps that call the model.
inline CliResult run_golden_pipeline(const fs::path& dir, const std::string& global = "",
                                     const std::string& model_flags = "") {
  const std::string d = dir.string() + "/";
  const std::vector<std::string> steps = {
      "generate " + data_path("corpus/hockey.txt") + " " + data_path("corpus/lillehammer.txt") + " " +
          data_path("corpus/oslo.txt") + " -o " + d + "chunks.json --mock-script " + data_path("mock_script.json") +
          " " + model_flags,
      "aggregate " + d + "chunks.json -o " + d + "graph.json",
      "cluster " + d + "graph.json -o " + d +
          "resolved.json --strategy hybrid --mock-duplicates token-subset --seed 42 " + model_flags,
      "stats " + d + "resolved.json --pre " + d + "graph.json -o " + d + "stats.json",
  };
  CliResult last;
  for (const auto& s : steps) {
    last = run_cli(global + " " + s);
    if (last.code != 0) return last;
  }
  return last;
}

}  // namespace kggen::testing
