#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spdnn::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kInvalid = 2, // parse, validation and shape errors
    kRuntime = 3, // numeric and I/O errors
};

/// Runs one `spdnn` invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace spdnn::cli
