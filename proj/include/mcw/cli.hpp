#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mcw::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2 };

/// Runs the command line. args excludes the program name. Structured output
/// goes to `out`, one-line diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace mcw::cli
