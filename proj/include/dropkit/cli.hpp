#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dropkit {

/// Runs one command line (args[0] is the program name) and returns the process exit status:
/// 0 on success, 64 usage, 65 data, 69 transport, 73 cannot create, 74 I/O, 78 config.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dropkit
