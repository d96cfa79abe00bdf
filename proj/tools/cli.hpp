#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dasphys::cli {

// Runs one command line (without the program name). Prints progress to `err`
// and a single JSON result line to `out`; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Exit code for an error category; 0 is success.
int exit_code_for(const std::string& kind);

}  // namespace dasphys::cli
