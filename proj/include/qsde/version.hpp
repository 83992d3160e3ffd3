#pragma once

namespace qsde {

inline constexpr const char* kVersion = "0.1.0";

} // namespace qsde
