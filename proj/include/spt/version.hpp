#pragma once

namespace spt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace spt
