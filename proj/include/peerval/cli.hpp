#pragma once

#include <ostream>

namespace peerval {

/// Entry point of the `peerval` executable. Returns the process exit status:
/// 0 on success, 2 on configuration or input errors, 1 on runtime failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace peerval
