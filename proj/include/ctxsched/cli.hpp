#pragma once

#include <ostream>

namespace ctxsched {

/// Entry point of the ctxsched command. Returns 0 on success, 1 for usage
/// or validation errors, 2 for runtime errors. Diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctxsched
