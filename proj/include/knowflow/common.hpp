#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace knowflow {

using PaperId = std::uint32_t;

/// Recoverable runtime failure (bad input, I/O, numerical breakdown).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform draw in [0, 1) that is a pure function of (seed, x, y).
constexpr double pair_uniform(std::uint64_t seed, PaperId x, PaperId y) {
  const std::uint64_t key = (std::uint64_t{x} << 32) | std::uint64_t{y};
  const std::uint64_t h = mix64(mix64(seed) ^ key);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace knowflow
