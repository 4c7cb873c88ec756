#pragma once

namespace ttc {

inline constexpr const char *kVersion = "0.1.0";

} // namespace ttc
