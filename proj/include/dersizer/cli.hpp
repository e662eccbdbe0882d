#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dersizer {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitSafetyCap = 3;

// Entry point of the der_sizer tool; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dersizer
