#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "gemmlab/harness.hpp"

namespace gemmlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Comma-separated items, each either N or MIN:MAX:xF (MIN, MIN*F, ... <= MAX).
// The union is sorted and deduplicated: "128:4096:x2,3072" gives the seven
// default sizes.
std::vector<std::size_t> parse_sizes(std::string_view text);

// Comma-separated backend names (seq, cpu, gpu-naive, gpu-tiled, or "all").
std::vector<Backend> parse_backends(std::string_view text);

// args excludes the program name. `hooks` lets tests swap kernels in.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const RunOptions& hooks = {});

}  // namespace gemmlab::cli
