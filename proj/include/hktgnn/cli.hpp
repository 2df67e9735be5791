#pragma once

namespace hktgnn {

/// Entry point of the command-line tool. Returns the process exit status:
/// 0 on success, 2 on usage or validation errors, 1 on runtime failures.
int run_cli(int argc, const char* const* argv);

}  // namespace hktgnn
