#pragma once

namespace purify {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace purify
