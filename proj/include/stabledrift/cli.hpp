#pragma once

// stabledrift density|kernel|resolvent|simulate|validate [flags]
// Exit codes: 0 ok, 1 validation failure, 2 configuration error, 3 numerical failure.

#include <iosfwd>

namespace sdrift::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdrift::cli
