#pragma once

namespace vulndet {

inline constexpr const char* kVersion = "0.1.0";

} // namespace vulndet
