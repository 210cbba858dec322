#pragma once

namespace datslice::cli {

// Exit codes: 0 success, 1 validation error, 2 I/O or format error,
// 3 empty feasible region in search.
int run(int argc, const char* const* argv);

}  // namespace datslice::cli
