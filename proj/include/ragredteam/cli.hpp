#pragma once

#include <string>
#include <vector>

namespace ragredteam::cli {

/// Entry point shared by the binary and the tests. Returns the process
/// exit code: 0 on success, 1 when --strict and any per-item failure
/// occurred (or on operational failure), 2 on configuration or usage
/// errors.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

} // namespace ragredteam::cli
