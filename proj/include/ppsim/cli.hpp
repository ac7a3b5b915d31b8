#pragma once

#include <string>
#include <vector>

namespace ppsim {

// Full command-line front end (train / measure / landscape / theory /
// dataset-dump). Returns the process exit code: 0 success, 1 runtime error,
// 2 configuration or usage error, 3 numerical abort.
int run_cli(int argc, const char* const* argv);

// Convenience for in-process invocation: args exclude the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace ppsim
