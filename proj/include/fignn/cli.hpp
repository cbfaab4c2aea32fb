#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fignn::cli {

/// Exit statuses of the command-line tool.
enum Exit : int { kOk = 0, kRuntime = 1, kUsage = 2 };

/// Runs one `fignn` invocation; args exclude the program name. Failures are
/// reported on `err` as a single JSON line {"error": {"kind", "message"}}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace fignn::cli
