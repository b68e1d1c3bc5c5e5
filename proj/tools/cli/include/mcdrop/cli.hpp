#pragma once

#include <ostream>

namespace mcdrop {

/// Entry point behind the `mcdrop` executable. Returns 0 on success, 1 when an
/// experiment or command failed, 2 on a usage error.
int cli_main(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace mcdrop
