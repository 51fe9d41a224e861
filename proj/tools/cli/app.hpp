#pragma once

#include <iosfwd>

namespace cts::cli {

/// Entry point behind `cts`. Results go to `out`, usage text and errors to
/// `err`; progress logs go to stderr.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cts::cli
