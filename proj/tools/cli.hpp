#pragma once

#include <iosfwd>

namespace agbp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the `agbp` tool. Results go to `out`, diagnostics and
/// progress to `err`. Returns 0 on success, 1 on usage or configuration
/// errors, 2 when a computation fails.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace agbp::cli
