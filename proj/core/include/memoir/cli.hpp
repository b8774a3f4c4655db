#pragma once

#include <iosfwd>

namespace memoir {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;

/// memoir-lab <generate|pretrain|train|evaluate|report|all> --config PATH
///            [--seed N] [--mode M] [--out DIR] [--threads N]
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace memoir
