#pragma once

namespace cellseg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cellseg
