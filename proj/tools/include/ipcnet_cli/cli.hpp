#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ipcnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Runs one command line (without the program name). Usage, configuration and
// input errors return kExitUsage, anything else that fails kExitRuntime.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ipcnet::cli
