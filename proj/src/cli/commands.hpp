#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace retrobleu::cli {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitIo = 2 };

/// Runs one `retrobleu` invocation. `args` excludes the program name.
/// Returns 0 on success, 1 for invalid input and 2 for I/O failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace retrobleu::cli
