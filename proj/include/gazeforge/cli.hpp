#pragma once

#include <string>
#include <vector>

namespace gazeforge {

/// Command-line front end.  args holds everything after the program name in
/// natural order.  Returns 0 on success, 2 on usage errors, 1 on processing
/// errors.
int run_cli(std::vector<std::string> args);

}  // namespace gazeforge
