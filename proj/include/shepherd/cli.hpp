#pragma once

#include <iosfwd>

namespace shepherd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;    // bad flags, unreadable or malformed input
inline constexpr int kExitBackend = 3;  // model backend failure
inline constexpr int kExitEpisode = 4;  // search episode aborted

/// Entry point of the `shepherd` tool. Results go to `out`, diagnostics to
/// `err`; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shepherd::cli
