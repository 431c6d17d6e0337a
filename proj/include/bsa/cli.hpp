#pragma once

namespace bsa {

// The `audit` command line. Exit codes: 0 = run completed (rejected or not),
// 2 = usage error, 3 = data/validation error, 4 = transport error.
int run_cli(int argc, const char* const* argv);

}  // namespace bsa
