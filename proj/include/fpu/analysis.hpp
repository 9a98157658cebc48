#pragma once

// Equilibrium diagnostics over recorded mode/trajectory streams: averaged
// power spectra with Rayleigh-Jeans fits, Welch spectrograms with peak and
// width extraction, measured vs analytic renormalization, scaling fits,
// nonlinearity ratios, the resonant quartic-term fraction, demodulated
// single-mode histories, and near-resonance quartet counting.
//
// Record sources are duck-typed: any `Source` with `bool next(T&)` that
// fills the next sample and returns false when exhausted works (T is
// ModeState or ChainState as appropriate). File-backed sources live in
// io.hpp; tests use small in-memory vectors.

#include <algorithm>
#include <complex>
#include <utility>

#include "fpu/spectral.hpp"

namespace fpu {

namespace detail {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t m = x.size();
  if (m != y.size() || m < 2) throw parameter_error("fit_line: need >= 2 matched points");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / static_cast<double>(m), my = sy / static_cast<double>(m);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw parameter_error("fit_line: degenerate abscissa");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

// Mode indices used for Rayleigh-Jeans fitting: drop the 3 lowest and 3
// highest k (poor frequency statistics) and the 3 nearest N/2 (broadest
// resonances). Falls back to all of 1..N-1 when the cut leaves < 4 modes.
inline std::vector<std::size_t> rj_fit_indices(std::size_t n) {
  std::vector<std::size_t> idx;
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < n; ++k) {
    if (k <= 3 || k >= n - 3) continue;
    if (k + 1 >= half && k <= half + 1) continue;
    idx.push_back(k);
  }
  if (idx.size() < 4) {
    idx.clear();
    for (std::size_t k = 1; k < n; ++k) idx.push_back(k);
  }
  return idx;
}

}  // namespace detail

struct PowerSpectrum {
  std::vector<double> mean_sq_a;  // <|a_k|^2>, k = 0..N-1 ([0] = 0)
  std::vector<double> omega;      // dispersion used as abscissa
  double temperature_fit = 0.0;   // T from slope-(-1)-pinned intercept
  double slope_fit = 0.0;         // free least-squares slope of log<|a|^2> vs log omega
  Dispersion dispersion_used = Dispersion::bare;
  double eta = 1.0;
  std::size_t n_samples = 0;
};

template <class Source>
PowerSpectrum average_power_spectrum(Source& src, Dispersion used, double eta = 1.0) {
  ModeState m;
  if (!src.next(m)) throw parameter_error("average_power_spectrum: empty record set");
  const std::size_t n = m.Q.size();
  PowerSpectrum ps;
  ps.dispersion_used = used;
  ps.eta = used == Dispersion::bare ? 1.0 : eta;
  ps.omega = dispersion_array(n, ps.eta);
  ps.mean_sq_a.assign(n, 0.0);

  std::vector<double> root2w(n, 1.0);
  for (std::size_t k = 1; k < n; ++k) root2w[k] = std::sqrt(2.0 * ps.omega[k]);
  do {
    if (m.Q.size() != n) throw invalid_modes_error("average_power_spectrum: mixed record sizes");
    for (std::size_t k = 1; k < n; ++k) {
      const std::complex<double> a =
          (m.P[k] - std::complex<double>(0.0, ps.omega[k]) * m.Q[k]) / root2w[k];
      ps.mean_sq_a[k] += std::norm(a);
    }
    ++ps.n_samples;
  } while (src.next(m));
  for (std::size_t k = 1; k < n; ++k) ps.mean_sq_a[k] /= static_cast<double>(ps.n_samples);

  const auto idx = detail::rj_fit_indices(n);
  std::vector<double> lw, lm;
  double pinned = 0.0;
  for (std::size_t k : idx) {
    if (!(ps.mean_sq_a[k] > 0.0))
      throw numerical_error("average_power_spectrum: vanishing <|a_k|^2> at k=" + std::to_string(k));
    lw.push_back(std::log(ps.omega[k]));
    lm.push_back(std::log(ps.mean_sq_a[k]));
    pinned += lm.back() + lw.back();
  }
  const auto fit = detail::fit_line(lw, lm);
  ps.slope_fit = fit.slope;
  ps.temperature_fit = std::exp(pinned / static_cast<double>(idx.size()));
  return ps;
}

struct WelchOptions {
  std::size_t segment = 16384;  // samples per segment
  double overlap = 0.5;         // fraction of segment shared with the next
};

struct SpectrogramResult {
  std::size_t n = 0;              // chain size
  std::vector<double> omega_bins; // positive half, j = 0..segment/2
  std::vector<double> power;      // (n-1) x omega_bins.size(), row-major in k-1
  std::vector<double> peak_omega; // k = 0..n-1 ([0] = 0), parabolic sub-bin peak
  std::vector<double> width;      // integral/max width per k ([0] = 0)
  std::size_t segment = 0;
  std::size_t n_segments = 0;
  double overlap = 0.0;
  double dt_sample = 0.0;

  double power_at(std::size_t k, std::size_t j) const {
    return power[(k - 1) * omega_bins.size() + j];
  }
};

// Welch-averaged periodograms of the complex series a_k(t) (bare normal
// variables; their spectral peak sits at the renormalized frequency).
// a_k ~ e^{-i omega t}, so the analysis kernel is e^{+i omega t}
// (FFTW_BACKWARD): renormalized peaks land in the positive-frequency half,
// which is the half retained, searched, and integrated.
template <class Source>
SpectrogramResult spectrogram(Source& src, double dt_sample, WelchOptions opt = {}) {
  if (!(dt_sample > 0.0)) throw parameter_error("spectrogram: dt_sample must be > 0");
  if (opt.segment < 16) throw parameter_error("spectrogram: segment must be >= 16");
  if (!(opt.overlap >= 0.0 && opt.overlap <= 0.95))
    throw parameter_error("spectrogram: overlap must lie in [0, 0.95]");

  ModeState m;
  if (!src.next(m)) throw parameter_error("spectrogram: empty record set");
  const std::size_t n = m.Q.size();
  const std::size_t L = opt.segment;
  const std::size_t hop = std::max<std::size_t>(1, L - static_cast<std::size_t>(
                                                        std::llround(opt.overlap * static_cast<double>(L))));
  std::vector<double> omega(n, 0.0), root2w(n, 1.0);
  for (std::size_t k = 1; k < n; ++k) {
    omega[k] = bare_dispersion(n, k);
    root2w[k] = std::sqrt(2.0 * omega[k]);
  }
  std::vector<double> win(L);
  double win_sq = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(L));
    win_sq += win[i] * win[i];
  }

  std::vector<std::complex<double>> buf((n - 1) * L);
  std::vector<double> acc((n - 1) * L, 0.0);
  std::vector<std::complex<double>> seg(L);
  std::size_t filled = 0, n_segments = 0;
  Dft& dft = cached_dft(L, FFTW_BACKWARD);

  auto flush_segment = [&] {
    for (std::size_t k = 1; k < n; ++k) {
      std::complex<double>* row = buf.data() + (k - 1) * L;
      for (std::size_t i = 0; i < L; ++i) seg[i] = row[i] * win[i];
      dft.execute(seg.data());
      double* out = acc.data() + (k - 1) * L;
      for (std::size_t i = 0; i < L; ++i) out[i] += std::norm(seg[i]);
    }
    ++n_segments;
    for (std::size_t k = 1; k < n; ++k) {
      std::complex<double>* row = buf.data() + (k - 1) * L;
      std::copy(row + hop, row + L, row);
    }
    filled = L - hop;
  };

  do {
    if (m.Q.size() != n) throw invalid_modes_error("spectrogram: mixed record sizes");
    for (std::size_t k = 1; k < n; ++k)
      buf[(k - 1) * L + filled] =
          (m.P[k] - std::complex<double>(0.0, omega[k]) * m.Q[k]) / root2w[k];
    if (++filled == L) flush_segment();
  } while (src.next(m));
  if (n_segments == 0)
    throw numerical_error("spectrogram: record shorter than one segment (" +
                          std::to_string(L) + " samples)");

  SpectrogramResult res;
  res.n = n;
  res.segment = L;
  res.n_segments = n_segments;
  res.overlap = opt.overlap;
  res.dt_sample = dt_sample;
  const std::size_t nb = L / 2 + 1;
  const double d_omega = 2.0 * kPi / (static_cast<double>(L) * dt_sample);
  res.omega_bins.resize(nb);
  for (std::size_t j = 0; j < nb; ++j) res.omega_bins[j] = d_omega * static_cast<double>(j);

  // PSD-style normalization; peaks and widths are scale free anyway.
  const double norm = dt_sample / (static_cast<double>(n_segments) * win_sq);
  res.power.resize((n - 1) * nb);
  res.peak_omega.assign(n, 0.0);
  res.width.assign(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double* full = acc.data() + (k - 1) * L;
    double* half = res.power.data() + (k - 1) * nb;
    for (std::size_t j = 0; j < nb; ++j) half[j] = full[j] * norm;

    std::size_t jmax = 0;
    for (std::size_t j = 1; j < nb; ++j)
      if (half[j] > half[jmax]) jmax = j;
    double peak = res.omega_bins[jmax];
    if (jmax > 0 && jmax + 1 < nb && half[jmax] > 0.0 && half[jmax - 1] > 0.0 &&
        half[jmax + 1] > 0.0) {
      const double lc = std::log(half[jmax]);
      const double ll = std::log(half[jmax - 1]);
      const double lr = std::log(half[jmax + 1]);
      const double den = ll - 2.0 * lc + lr;
      if (den < 0.0) peak += d_omega * 0.5 * (ll - lr) / den;
    }
    res.peak_omega[k] = peak;
    double total = 0.0;
    for (std::size_t j = 0; j < nb; ++j) total += half[j];
    if (half[jmax] > 0.0) res.width[k] = total * d_omega / half[jmax];
  }
  return res;
}

struct EtaMeasurement {
  double eta_fit = 1.0;       // least squares of peak_omega[k] vs 2 sin(pi k/N)
  double eta_halfband = 1.0;  // single-point estimate peak_omega[N/2] / 2
};

inline EtaMeasurement measure_eta(const SpectrogramResult& spec) {
  const std::size_t n = spec.n;
  if (n < 4 || spec.peak_omega.size() != n)
    throw parameter_error("measure_eta: malformed spectrogram result");
  double num = 0.0, den = 0.0;
  std::size_t valid = 0;
  for (std::size_t k = 1; k < n; ++k) {
    const double s = bare_dispersion(n, k);
    const double p = spec.peak_omega[k];
    if (!std::isfinite(p) || !(p > 0.0)) continue;
    num += p * s;
    den += s * s;
    ++valid;
  }
  if (valid < 4 || !(den > 0.0))
    throw numerical_error("measure_eta: degenerate peak set (" + std::to_string(valid) +
                          " usable peaks)");
  EtaMeasurement em;
  em.eta_fit = num / den;
  em.eta_halfband = spec.peak_omega[n / 2] / 2.0;
  return em;
}

struct ScalingFit {
  double exponent = 0.0;
  double prefactor = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (beta, eta) as fitted
};

// Log-log least squares of eta against beta. Requires >= 4 points spanning
// at least one decade in beta; anything less cannot support a power law.
inline ScalingFit eta_beta_scaling(std::span<const std::pair<double, double>> points) {
  if (points.size() < 4) throw parameter_error("eta_beta_scaling: need >= 4 (beta, eta) points");
  double bmin = points[0].first, bmax = points[0].first;
  std::vector<double> lx, ly;
  for (const auto& [b, e] : points) {
    if (!(b > 0.0) || !(e > 0.0))
      throw parameter_error("eta_beta_scaling: beta and eta must be positive");
    bmin = std::min(bmin, b);
    bmax = std::max(bmax, b);
    lx.push_back(std::log(b));
    ly.push_back(std::log(e));
  }
  if (bmax < 10.0 * bmin)
    throw parameter_error("eta_beta_scaling: beta values must span at least one decade");
  const auto fit = detail::fit_line(lx, ly);
  ScalingFit sf;
  sf.exponent = fit.slope;
  sf.prefactor = std::exp(fit.intercept);
  sf.r_squared = fit.r_squared;
  sf.points.assign(points.begin(), points.end());
  return sf;
}

struct NonlinearityRatios {
  double h4_over_h2 = 0.0;    // time average of H4/H2
  double h4t_over_h2t = 0.0;  // time average of H~4/H~2 at the supplied eta
  std::size_t n_samples = 0;
};

template <class TrajSource>
NonlinearityRatios nonlinearity_ratios(TrajSource& src, const ChainParams& params, double eta) {
  if (!(eta > 0.0)) throw parameter_error("nonlinearity_ratios: eta must be > 0");
  NonlinearityRatios r;
  ChainState s;
  double sum_bare = 0.0, sum_renorm = 0.0;
  while (src.next(s)) {
    const EnergyBreakdown e = total_energy(s, params);
    if (!(e.h2 > 0.0)) throw numerical_error("nonlinearity_ratios: vanishing H2 sample");
    const ModeState m = to_modes(s);
    const QuadraticSplit qs = quadratic_energies(m, eta, e.total);
    if (!(qs.h2t > 0.0)) throw numerical_error("nonlinearity_ratios: vanishing H~2 sample");
    sum_bare += e.h4 / e.h2;
    sum_renorm += qs.h4t / qs.h2t;
    ++r.n_samples;
  }
  if (r.n_samples == 0) throw parameter_error("nonlinearity_ratios: empty record set");
  r.h4_over_h2 = sum_bare / static_cast<double>(r.n_samples);
  r.h4t_over_h2t = sum_renorm / static_cast<double>(r.n_samples);
  return r;
}

struct QuarticDecomposition {
  double resonant = 0.0;  // quadruple sum restricted to k1+k2+k3+k4 = 2N
  double total = 0.0;     // full constrained sum; equals site-space H4
};

// Mode-space quartic energy, split into the resonant class and the total.
// With R_k = Q_k (1 - e^{i 2 pi k/N}),
//   H4 = (beta/4N) sum over k1..k4 in 1..N-1 with k1+k2+k3+k4 = 0 (mod N)
//        of R_{k1} R_{k2} R_{k3} R_{k4},
// and the admissible sums are N, 2N, 3N. Rewriting a term with two indices
// conjugated (R_{N-k} = R_k*) shows the 2N class is exactly the set
// expressible as Q_k Q_l Q_m* Q_s* with k+l = m+s; the N and 3N classes are
// the umklapp remainder. Evaluated in O(N^2) through the linear
// self-convolution C_s = sum_{k1+k2=s} R_{k1} R_{k2}.
inline QuarticDecomposition quartic_mode_sums(const ModeState& m, double beta) {
  const std::size_t n = m.Q.size();
  if (n < 4) throw invalid_modes_error("quartic_mode_sums: need N >= 4");
  std::vector<std::complex<double>> R(n);
  for (std::size_t k = 1; k < n; ++k) {
    const double ang = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    R[k] = m.Q[k] * (std::complex<double>(1.0, 0.0) -
                     std::complex<double>(std::cos(ang), std::sin(ang)));
  }
  std::vector<std::complex<double>> C(2 * n - 1, {0.0, 0.0});
  for (std::size_t k1 = 1; k1 < n; ++k1)
    for (std::size_t k2 = k1; k2 < n; ++k2) {
      const std::complex<double> prod = R[k1] * R[k2];
      C[k1 + k2] += (k1 == k2) ? prod : 2.0 * prod;
    }
  auto class_sum = [&](std::size_t w) {
    std::complex<double> acc{0.0, 0.0};
    const std::size_t lo = std::max<std::size_t>(2, w > 2 * n - 2 ? w - (2 * n - 2) : 2);
    const std::size_t hi = std::min<std::size_t>(2 * n - 2, w - 2);
    for (std::size_t s = lo; s <= hi; ++s) acc += C[s] * C[w - s];
    return acc;
  };
  const double scale = beta / (4.0 * static_cast<double>(n));
  QuarticDecomposition d;
  d.resonant = scale * class_sum(2 * n).real();
  d.total = scale * (class_sum(n) + class_sum(2 * n) + class_sum(3 * n)).real();
  return d;
}

// Fraction of the quartic energy carried by the resonant (non-umklapp)
// class: time average of |resonant sum| over time average of the total.
// Frames are drawn uniformly from the stream by reservoir sampling so the
// O(N^2) per-frame cost stays bounded on long records.
template <class ModeSource>
double resonant_quartic_fraction(ModeSource& src, double beta, std::size_t max_frames = 100,
                                 std::uint64_t seed = 0x5eed) {
  if (!(beta > 0.0))
    throw parameter_error("resonant_quartic_fraction: beta must be > 0 (H4 vanishes otherwise)");
  if (max_frames == 0) throw parameter_error("resonant_quartic_fraction: max_frames must be >= 1");
  std::vector<ModeState> frames;
  frames.reserve(max_frames);
  std::uint64_t rng = seed;
  std::uint64_t seen = 0;
  ModeState m;
  while (src.next(m)) {
    if (frames.size() < max_frames) {
      frames.push_back(m);
    } else {
      const std::uint64_t j = splitmix64(rng) % (seen + 1);
      if (j < max_frames) frames[j] = m;
    }
    ++seen;
  }
  if (frames.empty()) throw parameter_error("resonant_quartic_fraction: empty record set");
  double num = 0.0, den = 0.0;
  for (const ModeState& f : frames) {
    const QuarticDecomposition d = quartic_mode_sums(f, beta);
    num += std::abs(d.resonant);
    den += std::abs(d.total);
  }
  if (!(den > 0.0)) throw numerical_error("resonant_quartic_fraction: vanishing quartic energy");
  return num / den;
}

struct ModeEvolution {
  std::size_t k = 0;
  Dispersion dispersion_used = Dispersion::bare;
  double omega_demod = 0.0;
  std::vector<double> t;
  std::vector<double> amplitude;  // |a_k(t)|
  std::vector<double> phase;      // unwrapped arg(a_k e^{+i omega t}): rotation removed
};

// Amplitude and demodulated phase of one mode. a_k rotates as e^{-i omega t},
// so multiplying by e^{+i omega t} leaves only the slow residual motion;
// demodulating at a wrong omega' leaves a linear ramp of slope omega' - omega.
template <class ModeSource>
ModeEvolution mode_evolution_record(ModeSource& src, std::size_t k, Dispersion used,
                                    double eta = 1.0) {
  ModeState m;
  if (!src.next(m)) throw parameter_error("mode_evolution_record: empty record set");
  const std::size_t n = m.Q.size();
  const double w_def = (used == Dispersion::bare ? 1.0 : eta) * bare_dispersion(n, k);
  if (!(w_def > 0.0)) throw parameter_error("mode_evolution_record: nonpositive frequency");
  ModeEvolution ev;
  ev.k = k;
  ev.dispersion_used = used;
  ev.omega_demod = w_def;
  const double root2w = std::sqrt(2.0 * w_def);
  bool first = true;
  double prev = 0.0;
  do {
    const std::complex<double> a =
        (m.P[k] - std::complex<double>(0.0, w_def) * m.Q[k]) / root2w;
    const double ang = std::arg(a * std::polar(1.0, w_def * m.t));
    double ph;
    if (first) {
      ph = ang;
      first = false;
    } else {
      ph = prev + wrap_phase(ang - prev);
    }
    prev = ph;
    ev.t.push_back(m.t);
    ev.amplitude.push_back(std::abs(a));
    ev.phase.push_back(ph);
  } while (src.next(m));
  return ev;
}

// Number of ordered quartets (k1,k2,k3,k4), k_i in 1..N-1, with
// k1+k2 = k3+k4 and |omega_{k1}+omega_{k2}-omega_{k3}-omega_{k4}| < delta.
// The pair sum is exact integer equality (the momentum-conserving,
// non-umklapp channel); with the strictly concave sine dispersion this
// makes the delta -> 0 limit contain only permutation-trivial quartets.
// Diagnostic only.
inline std::uint64_t near_resonance_count(std::size_t n, std::span<const double> omega,
                                          double delta) {
  if (!(delta > 0.0)) throw parameter_error("near_resonance_count: delta must be > 0");
  if (omega.size() != n) throw parameter_error("near_resonance_count: omega must have length N");
  std::vector<std::vector<double>> bucket(2 * n - 1);
  for (std::size_t k1 = 1; k1 < n; ++k1)
    for (std::size_t k2 = 1; k2 < n; ++k2) bucket[k1 + k2].push_back(omega[k1] + omega[k2]);
  std::uint64_t count = 0;
  for (auto& b : bucket) {
    if (b.empty()) continue;
    std::sort(b.begin(), b.end());
    std::size_t lo = 0, hi = 0;
    for (std::size_t r = 0; r < b.size(); ++r) {
      while (b[r] - b[lo] >= delta) ++lo;
      if (hi < r) hi = r;
      while (hi + 1 < b.size() && b[hi + 1] - b[r] < delta) ++hi;
      count += static_cast<std::uint64_t>(hi - lo + 1);
    }
  }
  return count;
}

}  // namespace fpu
