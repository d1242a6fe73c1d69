#pragma once

// Command-line front end: separate | bench | inspect | mix.
//
// Exit codes: 0 success, 2 I/O, parse or flag errors, 3 optimizer failure
// (lambda_overflow, solver_failure, numerical breakdown).

#include <ostream>
#include <string>
#include <vector>

namespace orthnewton::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitOptimizer = 3;

/// `args` excludes the program name.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace orthnewton::cli
