#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace locsyn::cli {

// Exit codes: 0 success/stable, 1 usage error, 2 numerical failure,
// 3 synthesis returned F = +inf (or an unstable / norm-infinite verdict).
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitInfinite = 3;

// Runs the locsyn command line (args without the program name).
int run(const std::vector<std::string>& args);

// Resolved-config round-trip helpers; every command that writes outputs
// saves its resolved configuration next to them.
std::string load_config_text(const std::filesystem::path& path);

}  // namespace locsyn::cli
