#pragma once

// Quartic Fermi-Pasta-Ulam chain on a periodic lattice:
//
//   H = 1/2 sum_i [ p_i^2 + (q_i - q_{i+1})^2 ] + beta/4 sum_i (q_i - q_{i+1})^4
//
// Energies, forces, thermal initial data and symplectic time stepping.

#include <algorithm>
#include <cstdint>
#include <utility>

#include "fpu/core.hpp"

namespace fpu {

struct ChainParams {
  std::size_t n = 128;          // number of sites, even, >= 4
  double beta = 1.0;            // quartic coupling, >= 0
  double target_energy = 200.0; // total H for generated initial data

  void validate() const {
    if (n < 4 || n % 2 != 0)
      throw parameter_error("ChainParams: n must be even and >= 4, got " + std::to_string(n));
    if (!(beta >= 0.0)) throw parameter_error("ChainParams: beta must be >= 0");
    if (!(target_energy > 0.0)) throw parameter_error("ChainParams: target_energy must be > 0");
  }
};

struct ChainState {
  std::vector<double> q;  // displacements
  std::vector<double> p;  // momenta
  double t = 0.0;
};

struct EnergyBreakdown {
  double h2 = 0.0;
  double h4 = 0.0;
  double total = 0.0;  // always h2 + h4
};

struct SiteEnergyField {
  std::vector<double> e;
  double t = 0.0;
};

namespace detail {

inline void require_consistent(const ChainState& s, const ChainParams& cp) {
  if (s.q.size() != cp.n || s.p.size() != cp.n)
    throw invalid_state_error("ChainState arrays do not match ChainParams.n");
  if (!all_finite(s.q) || !all_finite(s.p))
    throw invalid_state_error("ChainState contains non-finite entries at t=" + std::to_string(s.t));
}

// f_i = g_{i-1} - g_i with g_j = r_j + beta r_j^3, r_j = q_j - q_{j+1}.
// The telescoping form makes sum_i f_i vanish identically.
inline void forces_into(std::span<const double> q, double beta, std::span<double> f) {
  const std::size_t n = q.size();
  double g_prev = 0.0, g_first = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = q[i] - q[(i + 1 == n) ? 0 : i + 1];
    const double g = r + beta * r * r * r;
    if (i == 0)
      g_first = g;
    else
      f[i] = g_prev - g;
    g_prev = g;
  }
  f[0] = g_prev - g_first;  // g_{n-1} - g_0
}

}  // namespace detail

inline EnergyBreakdown total_energy(const ChainState& s, const ChainParams& cp) {
  detail::require_consistent(s, cp);
  const std::size_t n = cp.n;
  double h2 = 0.0, h4 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = s.q[i] - s.q[(i + 1 == n) ? 0 : i + 1];
    const double r2 = r * r;
    h2 += s.p[i] * s.p[i] + r2;
    h4 += r2 * r2;
  }
  h2 *= 0.5;
  h4 *= 0.25 * cp.beta;
  return {h2, h4, h2 + h4};
}

inline std::vector<double> forces(const ChainState& s, const ChainParams& cp) {
  detail::require_consistent(s, cp);
  std::vector<double> f(cp.n);
  detail::forces_into(s.q, cp.beta, f);
  return f;
}

// One velocity-Verlet step. Time reversible: negate p, step, negate p
// undoes a forward step up to round-off.
inline ChainState step(const ChainState& s, const ChainParams& cp, double dt) {
  if (!(dt > 0.0)) throw parameter_error("step: dt must be > 0");
  detail::require_consistent(s, cp);
  ChainState out = s;
  std::vector<double> f(cp.n);
  detail::forces_into(out.q, cp.beta, f);
  const std::size_t n = cp.n;
  for (std::size_t i = 0; i < n; ++i) out.p[i] += 0.5 * dt * f[i];
  for (std::size_t i = 0; i < n; ++i) out.q[i] += dt * out.p[i];
  detail::forces_into(out.q, cp.beta, f);
  for (std::size_t i = 0; i < n; ++i) out.p[i] += 0.5 * dt * f[i];
  out.t = s.t + dt;
  return out;
}

// Integrate to t_end, emitting the current state to `sink` every
// `sample_every` steps (the initial state included). The state is checked
// for blow-up at every emission point; a non-finite entry aborts with the
// offending step index.
template <class Sink>
ChainState integrate(ChainState s, const ChainParams& cp, double dt, double t_end,
                     std::size_t sample_every, Sink&& sink) {
  if (!(dt > 0.0)) throw parameter_error("integrate: dt must be > 0");
  if (sample_every == 0) throw parameter_error("integrate: sample_every must be >= 1");
  detail::require_consistent(s, cp);

  const double t0 = s.t;
  const auto n_steps =
      static_cast<std::uint64_t>(std::llround(std::max(0.0, t_end - t0) / dt));
  const std::size_t n = cp.n;

  std::vector<double> f(n);
  detail::forces_into(s.q, cp.beta, f);
  sink(std::as_const(s));

  for (std::uint64_t k = 1; k <= n_steps; ++k) {
    for (std::size_t i = 0; i < n; ++i) s.p[i] += 0.5 * dt * f[i];
    for (std::size_t i = 0; i < n; ++i) s.q[i] += dt * s.p[i];
    detail::forces_into(s.q, cp.beta, f);
    for (std::size_t i = 0; i < n; ++i) s.p[i] += 0.5 * dt * f[i];
    s.t = t0 + static_cast<double>(k) * dt;
    if (k % sample_every == 0 || k == n_steps) {
      if (!all_finite(s.q) || !all_finite(s.p))
        throw numerical_error("integration blew up at step " + std::to_string(k) +
                              " (t=" + std::to_string(s.t) + ")");
      if (k % sample_every == 0) sink(std::as_const(s));
    }
  }
  return s;
}

inline ChainState advance(ChainState s, const ChainParams& cp, double dt, double t_end,
                          std::size_t check_every = 1000) {
  return integrate(std::move(s), cp, dt, t_end, check_every, [](const ChainState&) {});
}

// Zero-mean Gaussian draws for q and p, mean removed from both (so total
// momentum and the k=0 mode stay exactly empty), then rescaled so that the
// total energy hits target_energy. H(c*state) = c^2 A + c^4 B with
// A = H2, B = H4, so the scale factor solves a quadratic in c^2 exactly.
inline ChainState random_initial_state(const ChainParams& cp, std::uint64_t seed) {
  cp.validate();
  Gaussian g(seed);
  ChainState s;
  s.q.resize(cp.n);
  s.p.resize(cp.n);
  for (auto& x : s.q) x = g();
  for (auto& x : s.p) x = g();
  const double mq = mean(s.q), mp = mean(s.p);
  for (auto& x : s.q) x -= mq;
  for (auto& x : s.p) x -= mp;

  const EnergyBreakdown e = total_energy(s, cp);
  const double a = e.h2, b = e.h4, target = cp.target_energy;
  double c2;
  if (b > 0.0)
    c2 = (-a + std::sqrt(a * a + 4.0 * b * target)) / (2.0 * b);
  else
    c2 = target / a;
  const double c = std::sqrt(c2);
  for (auto& x : s.q) x *= c;
  for (auto& x : s.p) x *= c;
  return s;
}

// Per-site energy density; each spring's energy is split half/half between
// its endpoint sites, so the field sums to the total energy.
inline SiteEnergyField site_energy_density(const ChainState& s, const ChainParams& cp) {
  detail::require_consistent(s, cp);
  const std::size_t n = cp.n;
  SiteEnergyField out;
  out.t = s.t;
  out.e.resize(n);
  auto spring = [&](double r) {
    const double r2 = r * r;
    return 0.5 * r2 + 0.25 * cp.beta * r2 * r2;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double r_right = s.q[i] - s.q[(i + 1 == n) ? 0 : i + 1];
    const double r_left = s.q[(i == 0) ? n - 1 : i - 1] - s.q[i];
    out.e[i] = 0.5 * s.p[i] * s.p[i] + 0.5 * (spring(r_right) + spring(r_left));
  }
  return out;
}

// Normalized spectral entropy exp(S)/(N-1) of the time-averaged linear
// mode energies E_k, k = 1..N-1. Equals 1 at perfect equipartition and
// 1/(N-1) when a single mode holds everything.
inline double equipartition_indicator(std::span<const double> mode_energy) {
  double total = 0.0;
  for (double e : mode_energy) {
    if (!(e >= 0.0)) throw invalid_state_error("equipartition_indicator: negative mode energy");
    total += e;
  }
  if (total <= 0.0) throw invalid_state_error("equipartition_indicator: all mode energies zero");
  double entropy = 0.0;
  for (double e : mode_energy) {
    if (e <= 0.0) continue;
    const double w = e / total;
    entropy -= w * std::log(w);
  }
  return std::exp(entropy) / static_cast<double>(mode_energy.size());
}

}  // namespace fpu
