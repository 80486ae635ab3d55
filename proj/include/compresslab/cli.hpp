#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace compresslab {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInvalid = 2;  // bad flags, missing or invalid config

/// Entry point of the `compresslab` binary. `args` excludes the program
/// name. Subcommands: run, mi, fit-rd, cost, glm, deepresearch, oracle-check.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace compresslab
