#pragma once

namespace activessf {

// Entry point of the activessf tool. Returns the process exit code:
// 0 on success, 1 for configuration errors, 2 for data errors.
int run_cli(int argc, char** argv);

}  // namespace activessf
