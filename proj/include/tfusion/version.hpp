#pragma once

namespace tfusion {

inline constexpr const char* kVersion = "0.1.0";

} // namespace tfusion
