#pragma once

#include <string>
#include <vector>

namespace ctn {

/// Runs the command-line front end; args exclude the program name.
/// Exit codes: 0 success, 2 parse/validation error, 3 infeasible system,
/// 4 resource bound exceeded, 1 anything else.
int run_cli(const std::vector<std::string>& args);

}  // namespace ctn
