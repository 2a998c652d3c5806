#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "rmcontrast/error.hpp"

namespace rmcontrast {

// 2 usage/configuration, 3 transport/replay_incomplete, 4 everything else.
int exit_code(ErrorKind kind);

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rmcontrast
