#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rlsf::cli {

enum ExitCode { kOk = 0, kValidation = 1, kFault = 2 };

/// Entry point shared by the binary and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rlsf::cli
