#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace klstd {

// Shortest decimal that round-trips the double exactly; keeps text outputs
// deterministic and re-readable without precision loss.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace klstd
