#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "record files are little-endian; big-endian hosts are not supported");

namespace fpu {

inline constexpr const char* kVersion = "0.1.0";

// ---- error taxonomy ------------------------------------------------------
// The CLI maps these onto exit codes: parameter/config -> 2,
// numerical -> 3, io -> 4.

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct parameter_error : error {
  using error::error;
};

struct invalid_state_error : error {
  using error::error;
};

struct invalid_modes_error : error {
  using error::error;
};

struct numerical_error : error {
  using error::error;
};

struct io_error : error {
  using error::error;
};

// ---- small numeric helpers ----------------------------------------------

inline constexpr double kPi = 3.14159265358979323846;

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double rms(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return xs.empty() ? 0.0 : std::sqrt(s / static_cast<double>(xs.size()));
}

// Wrap a phase increment into (-pi, pi]; used for incremental unwrapping.
inline double wrap_phase(double d) {
  d = std::fmod(d + kPi, 2.0 * kPi);
  if (d < 0) d += 2.0 * kPi;
  return d - kPi;
}

// ---- deterministic random numbers ---------------------------------------
// The library never uses std::*_distribution: their output is
// implementation-defined, which would break the bit-identical-rerun
// guarantee. splitmix64 + Box-Muller are fully specified here.

inline std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform in (0, 1]: 53-bit mantissa, never exactly zero.
inline double uniform_unit(std::uint64_t& s) {
  return static_cast<double>((splitmix64(s) >> 11) + 1) * 0x1.0p-53;
}

// Standard normal deviates, Box-Muller with a cached second value.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : state_(seed) {}

  double operator()() {
    if (have_cache_) {
      have_cache_ = false;
      return cache_;
    }
    const double u1 = uniform_unit(state_);
    const double u2 = uniform_unit(state_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    cache_ = r * std::sin(a);
    have_cache_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double cache_ = 0.0;
  bool have_cache_ = false;
};

}  // namespace fpu
