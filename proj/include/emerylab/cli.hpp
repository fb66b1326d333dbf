#pragma once

// Command-line front end. `run` never calls exit() and writes only to the
// streams it is given, so it can be driven from tests.
//
// Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 I/O failure.

#include <ostream>

#include "emerylab/error.hpp"

namespace emerylab::cli {

int exit_code(ErrorCode code);

/// Worker count from EMERYLAB_THREADS; unset or 0 means one per hardware thread.
unsigned worker_count();

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace emerylab::cli
