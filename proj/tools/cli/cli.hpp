#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cachetune::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitEnvironment = 3;

// Runs one `cachetune` invocation. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cachetune::cli
