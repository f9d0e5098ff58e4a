#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace taleweaver::cli {

enum ExitCode : int {
    kOk = 0,
    kStoryError = 1,
    kUsageError = 2,
    kRuntimeError = 3,
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

// Applies TALEWEAVER_LOG (error|warn|info|debug) to the stderr logger.
void configure_logging();

}  // namespace taleweaver::cli
