#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace editlab {

// Full command-line entry point, in-process testable. `args` excludes the
// program name. Returns the process exit code: 0 success, 1 validation
// error, 2 runtime/numerical error, 3 self-test failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace editlab
