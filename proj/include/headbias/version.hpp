#pragma once

namespace headbias {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace headbias
