#pragma once

// Numerical self-verification. Each check exercises one invariant the rest of
// the toolkit leans on, with the tolerance pinned next to the check. The
// `verify` CLI verb runs the list and prints one [PASS]/[FAIL] line per check.
//
// "Energy drift" is the secular trend of H(t): the slope of a linear fit
// times the window length, relative to H. A symplectic integrator's bounded
// energy oscillation (~(omega dt)^2 per mode) is not drift and is reported
// separately in the detail string.

#include <sstream>

#include "fpu/experiment.hpp"

namespace fpu {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

namespace detail {

inline CheckResult make_check(const char* name, double measured, double tol,
                              std::string detail_text = {}) {
  return {name, measured <= tol && std::isfinite(measured), measured, tol,
          std::move(detail_text)};
}

inline ChainState random_state(std::size_t n, double beta, double energy, std::uint64_t seed) {
  return random_initial_state({n, beta, energy}, seed);
}

// max_i |x_i - y_i| / scale
inline double max_rel_diff(std::span<const double> x, std::span<const double> y, double scale) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m / scale;
}

inline CheckResult check_forces_fd() {
  const std::size_t n = 16;
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const double beta = (trial % 3 == 0) ? 0.0 : (trial % 3 == 1) ? 1.0 : 4.0;
    const ChainParams cp{n, beta, 5.0};
    ChainState s = random_state(n, beta, 5.0, 1000 + static_cast<std::uint64_t>(trial));
    const std::vector<double> f = forces(s, cp);
    double scale = 1.0;
    for (double v : f) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < n; ++i) {
      ChainState sp = s, sm = s;
      sp.q[i] += h;
      sm.q[i] -= h;
      const double f_fd =
          -(total_energy(sp, cp).total - total_energy(sm, cp).total) / (2.0 * h);
      worst = std::max(worst, std::abs(f[i] - f_fd) / scale);
    }
  }
  return make_check("forces-vs-finite-difference", worst, 1e-6, "100 random states, N=16");
}

inline CheckResult check_dft_direct() {
  const std::size_t n = 16;
  const ChainState s = random_state(n, 1.0, 5.0, 42);
  const ModeState m = to_modes(s);
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> qk{0.0, 0.0}, pk{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = -2.0 * kPi * static_cast<double>(k * j) / static_cast<double>(n);
      const std::complex<double> w{std::cos(ang), std::sin(ang)};
      qk += s.q[j] * w;
      pk += s.p[j] * w;
    }
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    qk *= norm;
    pk *= norm;
    worst = std::max({worst, std::abs(m.Q[k] - qk), std::abs(m.P[k] - pk)});
    scale = std::max({scale, std::abs(qk), std::abs(pk)});
  }
  return make_check("dft-matches-direct-sum", worst / scale, 1e-10, "N=16 vs brute-force kernel");
}

inline CheckResult check_round_trip() {
  const std::size_t n = 32;
  const ChainState s = random_state(n, 1.0, 10.0, 7);
  const ChainState back = from_modes(to_modes(s));
  const double scale = std::max(rms(s.q), rms(s.p));
  const double worst =
      std::max(max_rel_diff(s.q, back.q, scale), max_rel_diff(s.p, back.p, scale));
  return make_check("mode-round-trip", worst, 1e-10, "site -> modes -> site, N=32");
}

inline CheckResult check_parseval() {
  const std::size_t n = 32;
  const ChainParams cp{n, 1.0, 10.0};
  const ChainState s = random_state(n, 1.0, 10.0, 99);
  const EnergyBreakdown eb = total_energy(s, cp);
  const QuadraticSplit qs = quadratic_energies(to_modes(s), 1.0, eb.total);
  const double err = std::abs(qs.h2t - eb.h2) / eb.h2;
  return make_check("parseval-quadratic-energy", err, 1e-10,
                    "site H2 equals mode-space quadratic form at eta=1");
}

inline CheckResult check_site_energy_sum() {
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const ChainParams cp{24, 2.0, 8.0};
    const ChainState s = random_state(24, 2.0, 8.0, 200 + static_cast<std::uint64_t>(trial));
    const SiteEnergyField f = site_energy_density(s, cp);
    double sum = 0.0;
    for (double e : f.e) sum += e;
    const double total = total_energy(s, cp).total;
    worst = std::max(worst, std::abs(sum - total) / total);
  }
  return make_check("site-energy-sum", worst, 1e-10, "sum of site energies equals H");
}

inline CheckResult check_normal_var_paths() {
  const std::size_t n = 32;
  const double eta = 1.3;
  const ModeState m = to_modes(random_state(n, 1.0, 10.0, 4242));
  const std::vector<double> wb = dispersion_array(n, 1.0);
  const std::vector<double> wr = dispersion_array(n, eta);
  const NormalModeVars a = normal_vars(m, wb, Dispersion::bare, 1.0);
  const NormalModeVars at_direct = normal_vars(m, wr, Dispersion::renormalized, eta);
  const std::vector<std::complex<double>> at_mapped = renormalized_from_bare(a.a, eta);
  const std::vector<std::complex<double>> a_back = bare_from_renormalized(at_mapped, eta);
  double scale = 0.0;
  for (std::size_t k = 1; k < n; ++k) scale = std::max(scale, std::abs(a.a[k]));
  double worst = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    worst = std::max(worst, std::abs(at_mapped[k] - at_direct.a[k]) / scale);
    worst = std::max(worst, std::abs(a_back[k] - a.a[k]) / scale);
  }
  return make_check("normal-variable-two-path", worst, 1e-10,
                    "definition at eta vs c+/c- map from bare, plus inverse");
}

inline CheckResult check_quartic_identity() {
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const double beta = 0.5 + 0.5 * trial;
    const ChainParams cp{16, beta, 6.0};
    const ChainState s = random_state(16, beta, 6.0, 300 + static_cast<std::uint64_t>(trial));
    const QuarticDecomposition qd = quartic_mode_sums(to_modes(s), beta);
    const double h4 = total_energy(s, cp).h4;
    worst = std::max(worst, std::abs(qd.total - h4) / h4);
  }
  return make_check("quartic-mode-identity", worst, 1e-8,
                    "mode-space constrained sum equals site-space H4, N=16");
}

// Interior of the series only: samples within edge_fraction of either end
// sit under the deep part of the compensation taper, where float roundoff is
// amplified by 1/w. Downstream consumers exclude the same band.
inline double filter_interior_diff(std::span<const double> x, std::span<const double> y) {
  const std::size_t m = x.size();
  const std::size_t edge = static_cast<std::size_t>(std::llround(0.05 * static_cast<double>(m)));
  double scale = 0.0, worst = 0.0;
  for (std::size_t i = edge; i < m - edge; ++i) scale = std::max(scale, std::abs(x[i]));
  for (std::size_t i = edge; i < m - edge; ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  return worst / std::max(scale, 1e-300);
}

inline std::vector<double> random_series(std::size_t m, std::uint64_t seed) {
  Gaussian g(seed);
  std::vector<double> x(m);
  for (auto& v : x) v = g();
  return x;
}

inline CheckResult check_filter_linearity() {
  const std::size_t m = 4096;
  const double dt = 0.1, cut = 7.0;
  const std::vector<double> g1 = random_series(m, 11);
  const std::vector<double> g2 = random_series(m, 12);
  std::vector<double> combo(m);
  for (std::size_t i = 0; i < m; ++i) combo[i] = 0.3 * g1[i] - 1.7 * g2[i];
  const std::vector<double> f1 = highpass_series(g1, cut, dt);
  const std::vector<double> f2 = highpass_series(g2, cut, dt);
  const std::vector<double> fc = highpass_series(combo, cut, dt);
  std::vector<double> lin(m);
  for (std::size_t i = 0; i < m; ++i) lin[i] = 0.3 * f1[i] - 1.7 * f2[i];
  return make_check("filter-linearity", filter_interior_diff(fc, lin), 1e-10,
                    "interior samples, 4096-point series");
}

inline CheckResult check_filter_idempotence() {
  const std::size_t m = 4096;
  const double dt = 0.1, cut = 7.0;
  const std::vector<double> g = random_series(m, 13);
  const std::vector<double> once = highpass_series(g, cut, dt);
  const std::vector<double> twice = highpass_series(once, cut, dt);
  return make_check("filter-idempotence", filter_interior_diff(once, twice), 1e-10,
                    "interior samples, 4096-point series");
}

inline CheckResult check_reversibility() {
  const std::size_t n = 32;
  const ChainParams cp{n, 1.0, 20.0};
  const ChainState s0 = random_state(n, 1.0, 20.0, 777);
  ChainState s = advance(s0, cp, 0.01, s0.t + 20.0);
  for (auto& v : s.p) v = -v;
  s = advance(std::move(s), cp, 0.01, s.t + 20.0);
  for (auto& v : s.p) v = -v;
  const double scale = std::max(rms(s0.q), rms(s0.p));
  const double worst =
      std::max(max_rel_diff(s.q, s0.q, scale), max_rel_diff(s.p, s0.p, scale));
  return make_check("time-reversibility", worst, 1e-10, "2000 steps out and back, N=32");
}

inline CheckResult check_energy_drift(const RunConfig& cfg) {
  const ChainParams cp = cfg.chain();
  ChainState s = random_state(cp.n, cp.beta, cp.target_energy, cfg.seed ^ 0xD21F7);
  const double e0 = total_energy(s, cp).total;
  std::vector<double> ts, hs;
  const std::size_t sample_every = std::max<std::size_t>(1, std::llround(1.0 / cfg.dt));
  double max_dev = 0.0;
  const auto sink = [&](const ChainState& st) {
    const double h = total_energy(st, cp).total;
    ts.push_back(st.t);
    hs.push_back(h);
    max_dev = std::max(max_dev, std::abs(h - e0) / e0);
  };
  integrate(std::move(s), cp, cfg.dt, cfg.t_record, sample_every, sink);
  const LineFit fit = fit_line(ts, hs);
  const double window = ts.back() - ts.front();
  const double trend = std::abs(fit.slope) * window / e0;
  std::ostringstream os;
  os << "window " << window << " tu at beta=" << cp.beta << ", dt=" << cfg.dt
     << "; max instantaneous |dH|/H " << max_dev;
  return make_check("energy-drift", trend, 1e-5, os.str());
}

}  // namespace detail

// The full check list. The drift check integrates cfg.t_record time units at
// the configured size and coupling, so it dominates the runtime.
inline std::vector<CheckResult> run_selfchecks(const RunConfig& cfg, std::ostream* out = nullptr) {
  std::vector<CheckResult> results;
  const auto emit = [&](CheckResult r) {
    if (out) {
      std::ostringstream os;
      os << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << "  measured=" << r.measured
         << "  tol=" << r.tolerance;
      if (!r.detail.empty()) os << "  (" << r.detail << ")";
      *out << os.str() << "\n" << std::flush;
    }
    results.push_back(std::move(r));
  };
  emit(detail::check_forces_fd());
  emit(detail::check_dft_direct());
  emit(detail::check_round_trip());
  emit(detail::check_parseval());
  emit(detail::check_site_energy_sum());
  emit(detail::check_normal_var_paths());
  emit(detail::check_quartic_identity());
  emit(detail::check_filter_linearity());
  emit(detail::check_filter_idempotence());
  emit(detail::check_reversibility());
  emit(detail::check_energy_drift(cfg));
  return results;
}

inline bool all_checks_passed(std::span<const CheckResult> results) {
  for (const auto& r : results)
    if (!r.passed) return false;
  return !results.empty();
}

}  // namespace fpu
