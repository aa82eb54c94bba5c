#ifndef FLAVOR_VERSION_HPP
#define FLAVOR_VERSION_HPP

namespace flavor {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace flavor

#endif
