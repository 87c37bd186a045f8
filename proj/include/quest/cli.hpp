#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace quest::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,       // abort-class pipeline error
    exit_missing_stage = 2, // an upstream artifact is absent
    exit_usage = 64,        // invalid flags or configuration
};

// Runs one quest-weaver invocation. args excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

} // namespace quest::cli
