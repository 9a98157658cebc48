#pragma once

// Site space <-> mode space conversions and the renormalized dispersion.
//
// Conventions, fixed once for the whole library:
//   * Unitary DFT, forward kernel e^{-2*pi*i*k*j/N}, 1/sqrt(N) both ways.
//     With this choice the mode-space quadratic form
//       H2 = 1/2 sum_k (|P_k|^2 + omega_k^2 |Q_k|^2),  omega_k = 2 sin(pi k/N),
//     equals the site-space H2 with no extra factors (Parseval).
//   * Normal variables a_k = (P_k - i omega_k Q_k)/sqrt(2 omega_k). Under
//     linear dynamics da_k/dt = -i omega_k a_k, so a_k rotates as
//     e^{-i omega_k t}.
//   * Renormalized dispersion: omega~_k = eta * omega_k with
//       eta = sqrt(1 + (3 beta / 2N) sum_{l=1}^{N-1} <|Q_l|^2> omega_l^2).
//   * Bare and renormalized normal variables are related exactly by
//       a_k = c+ a~_k + c- conj(a~_{N-k}),   c± = (sqrt(eta) ± 1/sqrt(eta))/2,
//     an area-preserving (det = 1) linear map.

#include <complex>

#include "fpu/chain.hpp"
#include "fpu/fft.hpp"

namespace fpu {

struct ModeState {
  std::vector<std::complex<double>> Q;  // mode displacements, k = 0..N-1
  std::vector<std::complex<double>> P;  // mode momenta
  double t = 0.0;
};

enum class Dispersion { bare, renormalized };

inline const char* to_string(Dispersion d) {
  return d == Dispersion::bare ? "bare" : "renormalized";
}

inline double bare_dispersion(std::size_t n, std::size_t k) {
  if (k < 1 || k > n - 1)
    throw parameter_error("bare_dispersion: k must satisfy 1 <= k <= N-1, got k=" +
                          std::to_string(k) + " for N=" + std::to_string(n));
  return 2.0 * std::sin(kPi * static_cast<double>(k) / static_cast<double>(n));
}

// omega[k] = eta * 2 sin(pi k/N) for k >= 1; omega[0] = 0 (zero mode).
inline std::vector<double> dispersion_array(std::size_t n, double eta = 1.0) {
  if (!(eta > 0.0)) throw parameter_error("dispersion_array: eta must be > 0");
  std::vector<double> w(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) w[k] = eta * bare_dispersion(n, k);
  return w;
}

inline ModeState to_modes(const ChainState& s) {
  const std::size_t n = s.q.size();
  if (n == 0 || n != s.p.size()) throw invalid_state_error("to_modes: empty or mismatched state");
  if (!all_finite(s.q) || !all_finite(s.p))
    throw invalid_state_error("to_modes: non-finite state");
  ModeState m;
  m.t = s.t;
  m.Q.resize(n);
  m.P.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.Q[i] = s.q[i];
    m.P[i] = s.p[i];
  }
  Dft& dft = cached_dft(n, FFTW_FORWARD);
  dft.execute(m.Q.data());
  dft.execute(m.P.data());
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    m.Q[k] *= norm;
    m.P[k] *= norm;
  }
  return m;
}

namespace detail {
inline double mode_scale(const ModeState& m) {
  double s = 1.0;
  for (const auto& z : m.Q) s = std::max({s, std::abs(z.real()), std::abs(z.imag())});
  for (const auto& z : m.P) s = std::max({s, std::abs(z.real()), std::abs(z.imag())});
  return s;
}
}  // namespace detail

// Inverse of to_modes. Rejects inputs that are not Hermitian-symmetric
// (Q_{N-k} = Q_k*, P likewise) at 1e-9 of the data scale: such data cannot
// come from a real field and signals corruption.
inline ChainState from_modes(const ModeState& m) {
  const std::size_t n = m.Q.size();
  if (n == 0 || n != m.P.size()) throw invalid_modes_error("from_modes: empty or mismatched modes");
  const double tol = 1e-9 * detail::mode_scale(m);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t kc = (n - k) % n;
    if (std::abs(m.Q[k] - std::conj(m.Q[kc])) > tol || std::abs(m.P[k] - std::conj(m.P[kc])) > tol)
      throw invalid_modes_error("from_modes: Hermitian symmetry violated at k=" + std::to_string(k));
  }
  std::vector<std::complex<double>> q(m.Q), p(m.P);
  Dft& dft = cached_dft(n, FFTW_BACKWARD);
  dft.execute(q.data());
  dft.execute(p.data());
  ChainState s;
  s.t = m.t;
  s.q.resize(n);
  s.p.resize(n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    s.q[i] = q[i].real() * norm;
    s.p[i] = p[i].real() * norm;
  }
  return s;
}

struct NormalModeVars {
  std::vector<std::complex<double>> a;  // k = 0..N-1; a[0] = 0 (zero mode excluded)
  Dispersion dispersion_used = Dispersion::bare;
  double eta = 1.0;
};

// a_k = (P_k - i omega[k] Q_k)/sqrt(2 omega[k]) for k = 1..N-1. The zero
// mode has omega_0 = 0 and carries only total momentum/displacement; its
// slot is kept (as 0) so indices line up with ModeState.
inline NormalModeVars normal_vars(const ModeState& m, std::span<const double> omega,
                                  Dispersion used = Dispersion::bare, double eta = 1.0) {
  const std::size_t n = m.Q.size();
  if (omega.size() != n) throw parameter_error("normal_vars: omega array must have length N");
  NormalModeVars v;
  v.dispersion_used = used;
  v.eta = eta;
  v.a.assign(n, {0.0, 0.0});
  for (std::size_t k = 1; k < n; ++k) {
    if (!(omega[k] > 0.0))
      throw parameter_error("normal_vars: omega[" + std::to_string(k) + "] must be > 0");
    const double w = omega[k];
    v.a[k] = (m.P[k] - std::complex<double>(0.0, w) * m.Q[k]) / std::sqrt(2.0 * w);
  }
  return v;
}

struct RenormReport {
  double eta_analytic = 1.0;
  std::vector<double> mean_Q_sq;  // time-averaged <|Q_l|^2>, l = 0..N-1 ([0] unused)
  double beta = 0.0;
  std::size_t n = 0;
};

// eta = sqrt(1 + (3 beta / 2N) sum_{l=1}^{N-1} <|Q_l|^2> omega_l^2), with
// bare omega_l. Evaluated once from the measured averages; no fixed-point
// iteration.
inline RenormReport eta_analytic(std::span<const double> mean_Q_sq, double beta, std::size_t n) {
  if (mean_Q_sq.size() != n) throw parameter_error("eta_analytic: mean_Q_sq must have length N");
  if (!(beta >= 0.0)) throw parameter_error("eta_analytic: beta must be >= 0");
  double acc = 0.0;
  for (std::size_t l = 1; l < n; ++l) {
    if (!(mean_Q_sq[l] >= 0.0)) throw parameter_error("eta_analytic: negative <|Q_l|^2>");
    const double w = bare_dispersion(n, l);
    acc += mean_Q_sq[l] * w * w;
  }
  RenormReport r;
  r.mean_Q_sq.assign(mean_Q_sq.begin(), mean_Q_sq.end());
  r.beta = beta;
  r.n = n;
  r.eta_analytic = std::sqrt(1.0 + 1.5 * beta / static_cast<double>(n) * acc);
  return r;
}

// a_k = c+ a~_k + c- conj(a~_{N-k}), c± = (sqrt(eta) ± 1/sqrt(eta))/2.
// Arrays are indexed 0..N-1 with slot 0 passed through untouched.
inline std::vector<std::complex<double>> bare_from_renormalized(
    std::span<const std::complex<double>> a_tilde, double eta) {
  if (!(eta > 0.0)) throw parameter_error("bare_from_renormalized: eta must be > 0");
  const std::size_t n = a_tilde.size();
  const double se = std::sqrt(eta);
  const double cp = 0.5 * (se + 1.0 / se), cm = 0.5 * (se - 1.0 / se);
  std::vector<std::complex<double>> a(n);
  if (n > 0) a[0] = a_tilde[0];
  for (std::size_t k = 1; k < n; ++k) a[k] = cp * a_tilde[k] + cm * std::conj(a_tilde[n - k]);
  return a;
}

// Inverse map: a~_k = c+ a_k - c- conj(a_{N-k}). c+^2 - c-^2 = 1 makes the
// pair exact mutual inverses.
inline std::vector<std::complex<double>> renormalized_from_bare(
    std::span<const std::complex<double>> a, double eta) {
  if (!(eta > 0.0)) throw parameter_error("renormalized_from_bare: eta must be > 0");
  const std::size_t n = a.size();
  const double se = std::sqrt(eta);
  const double cp = 0.5 * (se + 1.0 / se), cm = 0.5 * (se - 1.0 / se);
  std::vector<std::complex<double>> at(n);
  if (n > 0) at[0] = a[0];
  for (std::size_t k = 1; k < n; ++k) at[k] = cp * a[k] - cm * std::conj(a[n - k]);
  return at;
}

struct QuadraticSplit {
  double h2t = 0.0;  // 1/2 sum_k (|P_k|^2 + (eta omega_k)^2 |Q_k|^2)
  double h4t = 0.0;  // residual total_h - h2t; sign unconstrained
};

// Splits the total energy against the (possibly renormalized) quadratic
// form. total_h must come from the site-space evaluation, so that
// h2t + h4t = H holds exactly by construction.
inline QuadraticSplit quadratic_energies(const ModeState& m, double eta, double total_h) {
  if (!(eta > 0.0)) throw parameter_error("quadratic_energies: eta must be > 0");
  const std::size_t n = m.Q.size();
  if (n == 0 || n != m.P.size())
    throw invalid_modes_error("quadratic_energies: empty or mismatched modes");
  double h2t = std::norm(m.P[0]) * 0.5;
  for (std::size_t k = 1; k < n; ++k) {
    const double w = eta * bare_dispersion(n, k);
    h2t += 0.5 * (std::norm(m.P[k]) + w * w * std::norm(m.Q[k]));
  }
  return {h2t, total_h - h2t};
}

// Instantaneous harmonic mode energies E_k = (|P_k|^2 + omega[k]^2 |Q_k|^2)/2.
// E[0] is the zero-mode kinetic part. Summed over k = 1..N-1 this equals
// sum_k omega_k |a_k|^2 (cross terms cancel pairwise under Hermitian symmetry).
inline std::vector<double> harmonic_mode_energies(const ModeState& m,
                                                  std::span<const double> omega) {
  const std::size_t n = m.Q.size();
  if (omega.size() != n)
    throw parameter_error("harmonic_mode_energies: omega array must have length N");
  std::vector<double> e(n);
  e[0] = 0.5 * std::norm(m.P[0]);
  for (std::size_t k = 1; k < n; ++k)
    e[k] = 0.5 * (std::norm(m.P[k]) + omega[k] * omega[k] * std::norm(m.Q[k]));
  return e;
}

}  // namespace fpu
