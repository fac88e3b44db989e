#pragma once

#include <string>
#include <vector>

namespace rsed {

// Entry point behind the robust-sed binary. args excludes the program name.
// Returns 0 on success, 1 on domain errors, 2 on usage errors.
int run_command(const std::vector<std::string>& args);

}  // namespace rsed
