#pragma once

// The perstd command-line front end, callable in-process so tests can drive
// it without spawning a shell.

#include <iosfwd>
#include <string>
#include <vector>

namespace perstd::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,     // unreadable or malformed input, I/O failure
  kNotGuaranteed = 2,   // recoverability could not be certified
  kNotConverged = 3,    // solver stopped at its iteration limit; results written
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace perstd::cli
