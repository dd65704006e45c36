#pragma once

namespace turbsyn {
inline constexpr const char* kToolVersion = "turbsyn 0.1.0";
}
