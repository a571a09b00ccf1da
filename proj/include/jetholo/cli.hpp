#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jetholo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

/// Command-line driver: `<command> <scene-file> [options]`, arguments without the program
/// name. Human-readable text goes to `out`, diagnostics to `err`; JSON and CSV artifacts are
/// written to the files named by --out and --csv. Verdicts other than "equivalent" do not
/// change the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jetholo::cli
