#pragma once

#include <iosfwd>

namespace dtrx::cli {

enum ExitCode : int {
    ok = 0,
    runtime_failure = 1,
    usage = 2,
    config = 3,
    model = 4,
    diverged = 5,
    gradcheck_failed = 6,
};

/// Entry point of the `dtrx` tool. Results go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace dtrx::cli
