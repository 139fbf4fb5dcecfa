#pragma once

#include <ostream>

namespace birksync {

/// Entry point of the `birksync` tool. Subcommands: generate, solve, sample,
/// eval, bench. Returns the process exit status; failures print
/// {"error": kind, "message": text} on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace birksync
