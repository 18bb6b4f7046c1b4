#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ragev {

// Exit codes of the ragev command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConflict = 3;
inline constexpr int kExitTransport = 4;

// args excludes the program name. `in` feeds the ask REPL.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace ragev
