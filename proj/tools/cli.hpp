#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bagreg::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kDataError = 3,
    kNumericalError = 4,
};

/// Runs the bagreg command line; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bagreg::cli
