#pragma once

namespace randse {

inline constexpr const char* kLibraryVersion = "0.1.0";

}  // namespace randse
