#pragma once

namespace lupts {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lupts
