#pragma once

// High-pass filtering of site trajectories and detection of localized
// high-frequency excitations that persist in the thermal background.
//
// The filter realizes a hard spectral cut made edge-safe by tapering:
//   1. multiply by the shifted periodic Hann taper w_i = sin^2(pi (i+1/2)/M)
//      (strictly positive, and exactly three DFT bins: 0 and ±1),
//   2. DFT, zero every bin with |omega| < omega_cut (DC included), inverse,
//   3. divide the taper back out.
// Division by the taper blows up round-off and leakage near the record
// ends, so the first and last 5% of samples are excluded from detection
// and from any rms statement, and no global statistic may mix them in.
// The map is linear, and exactly idempotent: multiplying the output by the
// taper reproduces the step 2 signal, which the cut leaves unchanged.

#include <algorithm>
#include <complex>

#include "fpu/chain.hpp"
#include "fpu/fft.hpp"

namespace fpu {

struct FilterSpec {
  double omega_cut = 7.0;  // hard cut; everything strictly below is removed
};

struct FilteredField {
  std::size_t n_sites = 0;
  std::size_t n_samples = 0;
  double dt_sample = 0.0;
  double t0 = 0.0;
  double edge_fraction = 0.05;  // per-end share of samples excluded downstream
  double source_rms = 0.0;      // rms of the unfiltered input field
  FilterSpec spec;
  std::vector<double> qf;  // site-major: qf[site * n_samples + i]

  double at(std::size_t site, std::size_t i) const { return qf[site * n_samples + i]; }
  std::size_t edge_samples() const {
    return static_cast<std::size_t>(std::llround(edge_fraction * static_cast<double>(n_samples)));
  }
  double time_at(std::size_t i) const { return t0 + dt_sample * static_cast<double>(i); }
};

// Filters one uniformly sampled series in place of a fresh vector.
inline std::vector<double> highpass_series(std::span<const double> g, double omega_cut,
                                           double dt_sample) {
  const std::size_t m = g.size();
  if (m < 2) throw parameter_error("highpass_series: need >= 2 samples");
  if (!(dt_sample > 0.0)) throw parameter_error("highpass_series: dt_sample must be > 0");
  const double nyquist = kPi / dt_sample;
  if (!(omega_cut > 0.0) || omega_cut >= nyquist)
    throw parameter_error("highpass_series: omega_cut must lie in (0, pi/dt_sample)");

  std::vector<double> w(m);
  std::vector<std::complex<double>> buf(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double s = std::sin(kPi * (static_cast<double>(i) + 0.5) / static_cast<double>(m));
    w[i] = s * s;
    buf[i] = w[i] * g[i];
  }
  cached_dft(m, FFTW_FORWARD).execute(buf.data());
  const double bin = 2.0 * kPi / (static_cast<double>(m) * dt_sample);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t dist = std::min(j, m - j);  // |frequency index|, negative half folded
    if (bin * static_cast<double>(dist) < omega_cut) buf[j] = 0.0;
  }
  cached_dft(m, FFTW_BACKWARD).execute(buf.data());
  std::vector<double> out(m);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = buf[i].real() * scale / w[i];
  return out;
}

// Filters a site-major matrix of per-site series. Requires at least 2^10
// samples: shorter records leave the taper compensation too little interior.
inline FilteredField highpass_filter(std::span<const double> site_major, std::size_t n_sites,
                                     std::size_t n_samples, double dt_sample, double t0,
                                     FilterSpec spec) {
  if (n_sites == 0) throw parameter_error("highpass_filter: need at least one site");
  if (n_samples < 1024) throw parameter_error("highpass_filter: record must have >= 1024 samples");
  if (site_major.size() != n_sites * n_samples)
    throw parameter_error("highpass_filter: matrix shape mismatch");
  FilteredField f;
  f.n_sites = n_sites;
  f.n_samples = n_samples;
  f.dt_sample = dt_sample;
  f.t0 = t0;
  f.spec = spec;
  f.qf.resize(site_major.size());
  double sq = 0.0;
  for (double x : site_major) sq += x * x;
  f.source_rms = std::sqrt(sq / static_cast<double>(site_major.size()));
  for (std::size_t s = 0; s < n_sites; ++s) {
    const auto row = site_major.subspan(s * n_samples, n_samples);
    const std::vector<double> out = highpass_series(row, spec.omega_cut, dt_sample);
    std::copy(out.begin(), out.end(), f.qf.begin() + static_cast<std::ptrdiff_t>(s * n_samples));
  }
  return f;
}

// Streams a trajectory record and filters the displacement field.
// Sampling must be uniform; the interval is inferred from the record.
template <class TrajSource>
FilteredField filtered_displacement(TrajSource& src, FilterSpec spec) {
  ChainState s;
  if (!src.next(s)) throw parameter_error("filtered_displacement: empty record set");
  const std::size_t n = s.q.size();
  std::vector<double> time_major(s.q.begin(), s.q.end());
  std::vector<double> times{s.t};
  while (src.next(s)) {
    if (s.q.size() != n) throw invalid_state_error("filtered_displacement: mixed record sizes");
    time_major.insert(time_major.end(), s.q.begin(), s.q.end());
    times.push_back(s.t);
  }
  const std::size_t m = times.size();
  if (m < 2) throw parameter_error("filtered_displacement: need >= 2 samples");
  const double dt = times[1] - times[0];
  for (std::size_t i = 1; i < m; ++i)
    if (std::abs(times[i] - times[i - 1] - dt) > 1e-6 * std::max(1.0, std::abs(dt)))
      throw parameter_error("filtered_displacement: nonuniform sampling");
  std::vector<double> site_major(n * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t site = 0; site < n; ++site) site_major[site * m + i] = time_major[i * n + site];
  time_major.clear();
  time_major.shrink_to_fit();
  return highpass_filter(site_major, n, m, dt, times[0], spec);
}

// Effective number of sites carrying the energy: (sum e)^2 / sum e^2.
// N for a uniform field, 1 for single-site concentration.
inline double participation_ratio(const SiteEnergyField& f) {
  double sum = 0.0, sumsq = 0.0;
  for (double e : f.e) {
    sum += e;
    sumsq += e * e;
  }
  if (!(sum > 0.0)) throw invalid_state_error("participation_ratio: zero energy field");
  return sum * sum / sumsq;
}

// Window fields set to 0 derive one period of the cut frequency from the
// field's sampling interval, the natural scale for everything band-limited
// above the cut.
struct TrackThresholds {
  double median_factor = 10.0;      // detection level over the spatial median
  double floor_frac = 1e-6;         // absolute floor as fraction of source rms^2 * cut^2
  std::size_t min_consecutive = 0;  // samples a site must stay hot (0 = one cut period)
  double max_hop = 2.0;             // sites a center may move per sample
  std::size_t max_gap = 0;          // samples a track survives unmatched (0 = one cut period)
  double span_level = 0.1;          // fraction of cluster peak that counts toward span
  std::size_t smooth_samples = 0;   // proxy envelope window (0 = one cut period, 1 = none)
};

struct BreatherTrack {
  double t_start = 0.0;
  double t_end = 0.0;
  double mean_site = 0.0;
  std::size_t max_span = 0;
  double oscillation_count = 0.0;  // zero crossings at the center site / 2
  double mean_frequency = 0.0;     // pi * crossing rate
  double peak_energy = 0.0;
  std::vector<double> times;
  std::vector<double> site_center;
  std::vector<std::size_t> span_sites;
};

namespace detail {

inline double circular_distance(double a, double b, double n) {
  double d = std::fmod(std::abs(a - b), n);
  return std::min(d, n - d);
}

struct Cluster {
  double center = 0.0;      // may exceed [0, n) before wrapping
  std::size_t span = 0;
  double peak_proxy = 0.0;
  std::size_t first_site = 0;
  std::size_t n_member = 0;
};

struct OpenTrack {
  std::vector<std::size_t> idx;       // time sample indices
  std::vector<double> centers;
  std::vector<std::size_t> spans;
  std::vector<std::pair<std::size_t, std::size_t>> extents;  // (first_site, n_member)
  double peak_proxy = 0.0;
  std::size_t gap = 0;
};

}  // namespace detail

// Detects localized high-frequency excitations in the filtered field.
// The detection field is the local energy proxy qf^2 * omega_cut^2,
// averaged over smooth_samples so the envelope stays up while qf passes
// through zero twice per oscillation. A site is hot when the proxy
// exceeds both median_factor times the instantaneous spatial median and
// an absolute floor tied to the unfiltered field's energy scale (without
// the floor, a median-relative test fires on the round-off-level residue
// a fully band-limited field leaves behind). Hot intervals shorter than
// min_consecutive samples are discarded, the survivors are clustered over
// adjacent sites, and clusters are linked greedily across samples. A
// track's span counts the cluster sites whose proxy reaches span_level of
// its peak, so faint shoulders do not inflate the reported width. The
// first and last edge_fraction of samples never participate.
inline std::vector<BreatherTrack> track_breathers(const FilteredField& f,
                                                  std::span<const double> energy_site_major,
                                                  TrackThresholds th = {}) {
  const std::size_t n = f.n_sites, m = f.n_samples;
  if (n == 0 || m == 0 || f.qf.size() != n * m)
    throw parameter_error("track_breathers: malformed filtered field");
  const bool has_energy = !energy_site_major.empty();
  if (has_energy && energy_site_major.size() != n * m)
    throw parameter_error("track_breathers: energy field shape mismatch");
  if (!(th.median_factor > 0.0)) throw parameter_error("track_breathers: invalid thresholds");
  if (th.smooth_samples == 0 || th.min_consecutive == 0 || th.max_gap == 0) {
    if (!(f.dt_sample > 0.0) || !(f.spec.omega_cut > 0.0))
      throw parameter_error("track_breathers: period-derived thresholds need dt and omega_cut");
  }
  const auto period_samples = [&] {
    if (!(f.dt_sample > 0.0) || !(f.spec.omega_cut > 0.0)) return std::size_t{1};
    const double p = 2.0 * kPi / (f.spec.omega_cut * f.dt_sample);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(p)));
  }();
  const std::size_t smooth = th.smooth_samples ? th.smooth_samples : period_samples;
  const std::size_t min_run = th.min_consecutive ? th.min_consecutive : period_samples;
  const std::size_t gap_limit = th.max_gap ? th.max_gap : period_samples;

  const std::size_t edge = f.edge_samples();
  if (m <= 2 * edge) return {};
  const std::size_t i_lo = edge, i_hi = m - edge;  // interior window [i_lo, i_hi)
  const double cut_sq = f.spec.omega_cut * f.spec.omega_cut;
  const double floor_level = th.floor_frac * f.source_rms * f.source_rms * cut_sq;

  // Envelope of the squared field: centered moving mean, clamped at the ends.
  std::vector<double> env;
  if (smooth > 1) {
    env.resize(n * m);
    for (std::size_t s = 0; s < n; ++s) {
      const double* row = f.qf.data() + s * m;
      double acc = 0.0;
      std::size_t lo = 0, hi = 0;  // current window [lo, hi)
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t want_lo = i >= smooth / 2 ? i - smooth / 2 : 0;
        const std::size_t want_hi = std::min(m, i + smooth / 2 + 1);
        while (hi < want_hi) acc += row[hi] * row[hi], ++hi;
        while (lo < want_lo) acc -= row[lo] * row[lo], ++lo;
        env[s * m + i] = acc / static_cast<double>(hi - lo);
      }
    }
  }

  auto proxy = [&](std::size_t site, std::size_t i) {
    if (smooth > 1) return env[site * m + i] * cut_sq;
    const double v = f.qf[site * m + i];
    return v * v * cut_sq;
  };

  // Hot mask per (site, time), thresholded against the per-time spatial median.
  std::vector<std::uint8_t> hot(n * m, 0);
  std::vector<double> col(n);
  for (std::size_t i = i_lo; i < i_hi; ++i) {
    for (std::size_t s = 0; s < n; ++s) col[s] = proxy(s, i);
    std::vector<double> tmp(col);
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(n / 2), tmp.end());
    const double level = std::max(th.median_factor * tmp[n / 2], floor_level);
    for (std::size_t s = 0; s < n; ++s)
      if (col[s] > level) hot[s * m + i] = 1;
  }

  // Keep only runs of at least min_run hot samples per site.
  for (std::size_t s = 0; s < n; ++s) {
    std::uint8_t* row = hot.data() + s * m;
    std::size_t i = i_lo;
    while (i < i_hi) {
      if (!row[i]) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < i_hi && row[j]) ++j;
      if (j - i < min_run) std::fill(row + i, row + j, std::uint8_t{0});
      i = j;
    }
  }

  // Spatial clustering per sample (periodic adjacency), then greedy linking.
  std::vector<detail::OpenTrack> open, closed;
  const double nd = static_cast<double>(n);
  for (std::size_t i = i_lo; i < i_hi; ++i) {
    std::vector<detail::Cluster> clusters;
    std::vector<std::uint8_t> seen(n, 0);
    for (std::size_t s0 = 0; s0 < n; ++s0) {
      if (!hot[s0 * m + i] || seen[s0]) continue;
      // Walk back to the start of this periodic run, then forward over it.
      std::size_t start = s0;
      while (hot[((start + n - 1) % n) * m + i] && ((start + n - 1) % n) != s0)
        start = (start + n - 1) % n;
      detail::Cluster c;
      c.first_site = start;
      double wsum = 0.0, wpos = 0.0;
      std::size_t s = start, len = 0;
      do {
        seen[s] = 1;
        const double p = proxy(s, i);
        c.peak_proxy = std::max(c.peak_proxy, p);
        wsum += p;
        wpos += p * static_cast<double>(start + len);  // unwrapped coordinate
        ++len;
        s = (s + 1) % n;
      } while (hot[s * m + i] && s != start);
      c.n_member = len;
      c.center = std::fmod(wsum > 0.0 ? wpos / wsum : static_cast<double>(start), nd);
      if (c.center < 0.0) c.center += nd;
      for (std::size_t l = 0; l < len; ++l)
        if (proxy((start + l) % n, i) >= th.span_level * c.peak_proxy) ++c.span;
      clusters.push_back(c);
    }

    // Greedy nearest-center association, allowing wider hops across gaps.
    std::vector<int> cluster_track(clusters.size(), -1);
    std::vector<std::uint8_t> track_used(open.size(), 0);
    struct Cand {
      double dist;
      std::size_t t, c;
    };
    std::vector<Cand> cands;
    for (std::size_t t = 0; t < open.size(); ++t)
      for (std::size_t c = 0; c < clusters.size(); ++c) {
        const double d = detail::circular_distance(open[t].centers.back(), clusters[c].center, nd);
        if (d <= th.max_hop * static_cast<double>(open[t].gap + 1)) cands.push_back({d, t, c});
      }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      return a.dist < b.dist || (a.dist == b.dist && (a.t < b.t || (a.t == b.t && a.c < b.c)));
    });
    for (const Cand& cd : cands) {
      if (track_used[cd.t] || cluster_track[cd.c] >= 0) continue;
      track_used[cd.t] = 1;
      cluster_track[cd.c] = static_cast<int>(cd.t);
      detail::OpenTrack& tr = open[cd.t];
      const detail::Cluster& c = clusters[cd.c];
      tr.idx.push_back(i);
      tr.centers.push_back(c.center);
      tr.spans.push_back(c.span);
      tr.extents.emplace_back(c.first_site, c.n_member);
      tr.peak_proxy = std::max(tr.peak_proxy, c.peak_proxy);
      tr.gap = 0;
    }
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (cluster_track[c] >= 0) continue;
      detail::OpenTrack tr;
      tr.idx.push_back(i);
      tr.centers.push_back(clusters[c].center);
      tr.spans.push_back(clusters[c].span);
      tr.extents.emplace_back(clusters[c].first_site, clusters[c].n_member);
      tr.peak_proxy = clusters[c].peak_proxy;
      open.push_back(std::move(tr));
      track_used.push_back(1);
    }
    for (std::size_t t = open.size(); t-- > 0;) {
      if (track_used.size() > t && track_used[t]) continue;
      if (++open[t].gap > gap_limit) {
        closed.push_back(std::move(open[t]));
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(t));
      }
    }
  }
  for (auto& tr : open) closed.push_back(std::move(tr));

  std::vector<BreatherTrack> tracks;
  for (const detail::OpenTrack& tr : closed) {
    if (tr.idx.size() < min_run) continue;
    BreatherTrack bt;
    bt.t_start = f.time_at(tr.idx.front());
    bt.t_end = f.time_at(tr.idx.back());
    // Unwrap the center sequence before averaging so a track hugging the
    // periodic seam does not average to the far side of the chain.
    double acc = tr.centers.front(), prev_u = tr.centers.front();
    std::vector<double> unwrapped{prev_u};
    for (std::size_t j = 1; j < tr.centers.size(); ++j) {
      double d = tr.centers[j] - tr.centers[j - 1];
      if (d > nd / 2) d -= nd;
      if (d < -nd / 2) d += nd;
      prev_u += d;
      unwrapped.push_back(prev_u);
      acc += prev_u;
    }
    double mean_u = std::fmod(acc / static_cast<double>(tr.centers.size()), nd);
    if (mean_u < 0.0) mean_u += nd;
    bt.mean_site = mean_u;
    bt.max_span = *std::max_element(tr.spans.begin(), tr.spans.end());
    bt.times.assign(tr.idx.size(), 0.0);
    for (std::size_t j = 0; j < tr.idx.size(); ++j) bt.times[j] = f.time_at(tr.idx[j]);
    bt.site_center.assign(tr.centers.begin(), tr.centers.end());
    bt.span_sites.assign(tr.spans.begin(), tr.spans.end());

    const auto sc =
        static_cast<std::size_t>(std::llround(mean_u)) % n;
    std::size_t crossings = 0;
    for (std::size_t i = tr.idx.front() + 1; i <= tr.idx.back(); ++i) {
      const double a = f.qf[sc * m + i - 1], b = f.qf[sc * m + i];
      if (a * b < 0.0) ++crossings;
    }
    const double duration = bt.t_end - bt.t_start;
    bt.oscillation_count = static_cast<double>(crossings) / 2.0;
    bt.mean_frequency = duration > 0.0 ? kPi * static_cast<double>(crossings) / duration : 0.0;

    double pe = 0.0;
    for (std::size_t j = 0; j < tr.idx.size(); ++j) {
      const auto [first, len] = tr.extents[j];
      for (std::size_t l = 0; l < len; ++l) {
        const std::size_t s = (first + l) % n;
        pe = std::max(pe, has_energy ? energy_site_major[s * m + tr.idx[j]]
                                     : proxy(s, tr.idx[j]));
      }
    }
    bt.peak_energy = pe;
    tracks.push_back(std::move(bt));
  }
  std::sort(tracks.begin(), tracks.end(), [](const BreatherTrack& a, const BreatherTrack& b) {
    return a.t_start < b.t_start || (a.t_start == b.t_start && a.mean_site < b.mean_site);
  });
  return tracks;
}

struct BreatherStats {
  std::size_t n_tracks = 0;
  double count_per_site_time = 0.0;
  double lifetime_bin_width = 10.0;
  std::vector<std::uint64_t> lifetime_hist;  // counts per lifetime_bin_width of lifetime
  std::vector<std::uint64_t> span_hist;      // counts indexed by max_span
  double mean_oscillation_frequency = 0.0;
};

inline BreatherStats breather_statistics(std::span<const BreatherTrack> tracks, double total_time,
                                         std::size_t n_sites, double lifetime_bin_width = 10.0) {
  if (!(total_time > 0.0) || n_sites == 0 || !(lifetime_bin_width > 0.0))
    throw parameter_error("breather_statistics: invalid record geometry");
  BreatherStats st;
  st.n_tracks = tracks.size();
  st.lifetime_bin_width = lifetime_bin_width;
  st.count_per_site_time =
      static_cast<double>(tracks.size()) / (static_cast<double>(n_sites) * total_time);
  double freq_acc = 0.0;
  for (const auto& t : tracks) {
    const auto lb = static_cast<std::size_t>((t.t_end - t.t_start) / lifetime_bin_width);
    if (st.lifetime_hist.size() <= lb) st.lifetime_hist.resize(lb + 1, 0);
    ++st.lifetime_hist[lb];
    if (st.span_hist.size() <= t.max_span) st.span_hist.resize(t.max_span + 1, 0);
    ++st.span_hist[t.max_span];
    freq_acc += t.mean_frequency;
  }
  if (!tracks.empty()) st.mean_oscillation_frequency = freq_acc / static_cast<double>(tracks.size());
  return st;
}

}  // namespace fpu
