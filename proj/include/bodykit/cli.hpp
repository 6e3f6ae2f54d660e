#pragma once

#include <string>
#include <vector>

namespace bodykit::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2, kPartial = 3 };

/// Entry point of the `bodykit` tool. args[0] is the program name.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace bodykit::cli
