#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ssrl {

// Error hierarchy. Every contract violation throws a named subclass so
// callers (and the CLI) can map failures to precise messages.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define SSRL_DEFINE_ERROR(NAME)                                   \
  struct NAME : Error {                                           \
    explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
  }

SSRL_DEFINE_ERROR(InputTooShort);
SSRL_DEFINE_ERROR(EmptyPool);
SSRL_DEFINE_ERROR(ZeroPowerSignal);
SSRL_DEFINE_ERROR(TooShortToJumble);
SSRL_DEFINE_ERROR(ShapeError);
SSRL_DEFINE_ERROR(GroupTooSmall);
SSRL_DEFINE_ERROR(AlignmentError);
SSRL_DEFINE_ERROR(BatchTooSmall);
SSRL_DEFINE_ERROR(InvalidWeight);
SSRL_DEFINE_ERROR(TooShort);
SSRL_DEFINE_ERROR(LabelError);
SSRL_DEFINE_ERROR(DegenerateTest);
SSRL_DEFINE_ERROR(MissingModality);
SSRL_DEFINE_ERROR(MissingLabels);
SSRL_DEFINE_ERROR(ModeViolation);
SSRL_DEFINE_ERROR(CheckpointError);
SSRL_DEFINE_ERROR(SplitError);
SSRL_DEFINE_ERROR(EmptySubset);
SSRL_DEFINE_ERROR(ConfigError);
SSRL_DEFINE_ERROR(IoError);

#undef SSRL_DEFINE_ERROR

// Seeded RNG wrapper. Gaussian draws use Box-Muller without caching so a
// fixed seed always yields the same stream regardless of call pattern.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    // 53-bit mantissa in [0, 1)
    return (gen_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  double gaussian(double mean, double stddev) {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    return mean + stddev * z;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

// Counter-based seed derivation: one master seed expands to independent
// per-run / per-component streams (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ssrl
