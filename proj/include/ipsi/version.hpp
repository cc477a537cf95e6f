#pragma once

namespace ipsi {

inline constexpr const char* kVersion = "0.1.0";

} // namespace ipsi
