#pragma once

namespace rdr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rdr
