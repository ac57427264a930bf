#pragma once

namespace xauc {

inline constexpr const char* kToolName = "xauc";
inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace xauc
