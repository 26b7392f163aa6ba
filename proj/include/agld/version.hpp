#ifndef AGLD_VERSION_HPP
#define AGLD_VERSION_HPP

namespace agld {
inline constexpr const char* kVersionString = "0.3.0";
}

#endif  // AGLD_VERSION_HPP
