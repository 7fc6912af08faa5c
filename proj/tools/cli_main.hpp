#pragma once

// Command-line entry point, separated from main() so the argument parsing,
// exit codes and file plumbing can be exercised in-process by tests.

namespace ncrsm::cli {

// Runs one tool invocation. Returns 0 on success, 1 on validation or usage
// errors, 2 on numerical divergence.
int cli_main(int argc, const char* const* argv);

}  // namespace ncrsm::cli
