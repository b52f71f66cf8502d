#pragma once

namespace aoifl {
inline constexpr const char* kVersion = "0.1.0";
}
