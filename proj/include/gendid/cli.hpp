#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gendid::cli {

// Exit statuses.
enum Status : int { kOk = 0, kConfig = 2, kInfeasible = 3, kData = 4, kNumerical = 5 };

// Runs `gendid <args...>` (args excludes the program name). `in` backs
// `--panel -`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

std::string version_string();

}  // namespace gendid::cli
