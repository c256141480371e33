#ifndef SBLOSS_VERSION_HPP
#define SBLOSS_VERSION_HPP

namespace sbloss {
inline constexpr const char* kVersion = "0.1.0";
}

#endif  // SBLOSS_VERSION_HPP
