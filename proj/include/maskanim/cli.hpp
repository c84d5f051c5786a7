#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace maskanim {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs `maskanim <subcommand> ...`; `args` excludes the program name.
/// Progress goes to `out`; failures print one `error: <category>: <message>`
/// line to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace maskanim
