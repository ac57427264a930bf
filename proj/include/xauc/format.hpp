#pragma once

#include <cstdio>
#include <string>

namespace xauc {

// Fixed-point decimal with the given number of decimals. snprintf on glibc
// rounds correctly to nearest, ties to even, which is the printing contract
// for all report output (default 6 decimals).
inline std::string format_fixed(double value, int decimals = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

}  // namespace xauc
