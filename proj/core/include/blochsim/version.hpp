#ifndef BLOCHSIM_VERSION_HPP
#define BLOCHSIM_VERSION_HPP

namespace blochsim {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kArtifactName = "blochsim";

}  // namespace blochsim

#endif
