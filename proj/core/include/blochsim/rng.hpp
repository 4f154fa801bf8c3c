#ifndef BLOCHSIM_RNG_HPP
#define BLOCHSIM_RNG_HPP

#include <cstdint>
#include <random>

namespace blochsim {

// splitmix64 step; used to derive well-separated per-sample seeds from a
// master seed so that ensemble members are independent streams and the
// assignment sample->stream never depends on thread scheduling.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stream `index` of a master seed. Index 0 is reserved for ensemble-level
// draws (e.g. imaging noise on averaged profiles).
inline std::mt19937_64 substream(std::uint64_t master_seed, std::uint64_t index) {
  std::uint64_t s = splitmix64(master_seed ^ splitmix64(index + 1));
  return std::mt19937_64(s);
}

}  // namespace blochsim

#endif
