#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace atesa {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Subcommands: ingest, stats, split, finetune, train, ensemble, evaluate,
// analyze, serve. Machine-readable results go to |out|, diagnostics to |err|.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace atesa
