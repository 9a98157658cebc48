#pragma once

// Thin FFTW3 wrapper: complex in-place transforms with plan caching.
//
// FFTW plan creation/destruction is not thread safe; a global mutex guards
// both. Execution happens on a per-instance buffer, so distinct Dft objects
// may run concurrently. Plans use FFTW_ESTIMATE only: planning must not
// depend on runtime measurement, or identical inputs could produce
// different round-off on different machines.

#include <complex>
#include <cstring>
#include <memory>
#include <mutex>
#include <unordered_map>

#include <fftw3.h>

#include "fpu/core.hpp"

namespace fpu {

namespace detail {
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

class Dft {
 public:
  // sign: FFTW_FORWARD (-1) applies kernel e^{-2*pi*i*j*k/n},
  //       FFTW_BACKWARD (+1) applies e^{+2*pi*i*j*k/n}. Unnormalized.
  Dft(std::size_t n, int sign) : n_(n), sign_(sign) {
    if (n == 0) throw parameter_error("Dft: size must be positive");
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (buf_ == nullptr) throw std::bad_alloc();
    std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, sign, FFTW_ESTIMATE);
    if (plan_ == nullptr) {
      fftw_free(buf_);
      throw numerical_error("Dft: FFTW plan creation failed for n=" + std::to_string(n));
    }
  }

  ~Dft() {
    std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(buf_);
  }

  Dft(const Dft&) = delete;
  Dft& operator=(const Dft&) = delete;

  std::size_t size() const { return n_; }
  int sign() const { return sign_; }

  // In-place unnormalized transform of data[0..n).
  void execute(std::complex<double>* data) {
    std::memcpy(buf_, static_cast<const void*>(data), sizeof(fftw_complex) * n_);
    fftw_execute_dft(plan_, buf_, buf_);
    std::memcpy(static_cast<void*>(data), buf_, sizeof(fftw_complex) * n_);
  }

 private:
  std::size_t n_;
  int sign_;
  fftw_plan plan_;
  fftw_complex* buf_;
};

// Per-thread plan cache keyed by (size, direction). Each thread owns its
// cached Dft objects outright, so execute() needs no further locking.
inline Dft& cached_dft(std::size_t n, int sign) {
  thread_local std::unordered_map<std::uint64_t, std::unique_ptr<Dft>> cache;
  const std::uint64_t key = (static_cast<std::uint64_t>(n) << 1) | (sign > 0 ? 1u : 0u);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_unique<Dft>(n, sign)).first;
  return *it->second;
}

}  // namespace fpu
