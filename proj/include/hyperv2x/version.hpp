#pragma once

namespace hyperv2x {

inline constexpr const char* kVersion = "hyperv2x 0.1.0";

}  // namespace hyperv2x
