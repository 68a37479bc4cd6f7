#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lexdrift::cli {

/// Runs one subcommand. `args` excludes the program name.
/// Returns 0 on success, 1 on a validation/runtime error and 2 on a usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lexdrift::cli
