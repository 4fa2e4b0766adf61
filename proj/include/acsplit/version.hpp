#pragma once

namespace acsplit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace acsplit
