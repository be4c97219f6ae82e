#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace csft::cli {

// Runs the `csft` command line. Returns the process exit code: 0 on
// success, 1 on a library error (printed as "<ErrorKind>: <message>"),
// 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

const char* version_string() noexcept;

} // namespace csft::cli
