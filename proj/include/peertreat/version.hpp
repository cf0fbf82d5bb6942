#pragma once

namespace peertreat {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace peertreat
