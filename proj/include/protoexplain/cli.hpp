#pragma once

#include <ostream>

#include "protoexplain/error.hpp"

namespace protoexplain {

// 0 ok, 2 bad input or configuration, 3 missing upstream artifact, 4 I/O.
int exit_code(ErrorKind kind);

// Entry point of the `protoexplain` tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace protoexplain
