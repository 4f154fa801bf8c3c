#ifndef BLOCHSIM_ERRORS_HPP
#define BLOCHSIM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace blochsim {

// Error taxonomy shared by the CLI exit-code mapping:
//   ConfigError      -> exit 2
//   ConvergenceError -> exit 3
//   IoError          -> exit 4
//   anything else    -> exit 1

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Iterative schemes that failed to reach their tolerance (basis truncation,
// least-squares iterations, integrator norm drift).
struct ConvergenceError : std::runtime_error {
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct SizeError : std::runtime_error {
  explicit SizeError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace blochsim

#endif
