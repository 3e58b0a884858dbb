#pragma once

#include <string_view>

namespace lpqsm {

inline constexpr std::string_view kArtifactName = "lpqsm";
inline constexpr std::string_view kArtifactVersion = "0.1.0";

}  // namespace lpqsm
