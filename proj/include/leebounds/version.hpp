#pragma once

namespace leebounds {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace leebounds
