#pragma once

// evclip <synth|train|eval|probe|export-mask|gradcheck> [--config PATH] [--seed N]
//        [--out PATH] [--ablate-mask] [--ablate-context]
// Exit codes: 0 success, 1 domain/config error, 2 I/O/format error,
// 3 verification failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace evclip::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitVerify = 3;

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

/// Worker count from EVCLIP_THREADS (unset: 0, single-threaded).
int threads_from_env();

}  // namespace evclip::cli
