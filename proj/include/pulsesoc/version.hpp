#pragma once

namespace pulsesoc {

inline constexpr const char* kVersion = "0.1.0";

} // namespace pulsesoc
