#pragma once

namespace odflow {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace odflow
