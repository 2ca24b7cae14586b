#pragma once

#include <string>
#include <vector>

namespace graphroute::harness {

// Entry point behind tools/main.cpp; also invoked directly by tests.
// Failures exit nonzero after printing one machine-readable error record
// {"error": kind, "message": ...} to stderr.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace graphroute::harness
