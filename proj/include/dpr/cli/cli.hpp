#pragma once

namespace dpr {

// Entry point behind main(): 0 success, 1 usage error, 2 data error,
// 3 endpoint error.
int run_cli(int argc, const char* const* argv);

}  // namespace dpr
