#pragma once

#include <string>
#include <vector>

namespace cvtp::cli {

/// Runs one CLI invocation (argv without the program name). Returns the
/// process exit status: 0 success, 2 usage error, 3 input-format error,
/// 4 numerical or degenerate-data error. Progress and the resolved
/// configuration go to stderr; artifacts go only to declared output paths.
int run(const std::vector<std::string>& args);

}  // namespace cvtp::cli
