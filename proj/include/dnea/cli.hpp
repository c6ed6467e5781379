#ifndef DNEA_CLI_HPP_
#define DNEA_CLI_HPP_

// Batch front end: gen, identify, rollout, bench and bic subcommands.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace dnea {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

/// Worker threads from DNEA_THREADS (default 1).
int threads_from_environment();

/// 64-bit FNV-1a, used for config and input file hashes in run manifests.
std::uint64_t fnv1a(std::string_view bytes);

/// Parses and runs one command. Messages go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dnea

#endif  // DNEA_CLI_HPP_
