#pragma once

namespace kggen::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kPipelineFailure = 1;
inline constexpr int kUsageError = 2;

int run(int argc, char** argv);

}  // namespace kggen::cli
