#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace evonash::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// args excludes the program name. Subcommands: evolve, bench, nash, match.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace evonash::cli
