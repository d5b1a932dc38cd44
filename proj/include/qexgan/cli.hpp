#pragma once

#include <string>
#include <vector>

namespace qexgan::cli {

/// Parses and runs one command line (without argv[0]). Returns the process
/// exit code: 0 on success, 2 for validation/usage errors, 1 for anything
/// else. Kept in-process so tests can drive the full tool without forking.
int run(const std::vector<std::string>& args);

}  // namespace qexgan::cli
