#pragma once

#include <ostream>

namespace protonet {

/// Entry point behind the `protonet` executable. Reports go to `out`,
/// diagnostics to `err`. Returns 0 on success, 1 for usage errors, 2 for
/// data validation failures and 3 for numeric failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace protonet
