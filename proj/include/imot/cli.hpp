#pragma once

namespace imot {

/// Entry point for the `imot` tool. Returns 0 on success, 1 on invalid
/// input or usage, 2 on runtime failure.
int run_cli(int argc, char** argv);

}  // namespace imot
