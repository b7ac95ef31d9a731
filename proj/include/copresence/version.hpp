#pragma once

namespace copresence {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace copresence
