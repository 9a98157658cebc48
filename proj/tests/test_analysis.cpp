#include <catch2/catch_amalgamated.hpp>

#include <fpu/analysis.hpp>
#include <fpu/chain.hpp>

using namespace fpu;
using cplx = std::complex<double>;

namespace {

struct VecModeSource {
  std::vector<ModeState> frames;
  std::size_t i = 0;
  bool next(ModeState& m) {
    if (i >= frames.size()) return false;
    m = frames[i++];
    return true;
  }
};

struct VecTrajSource {
  std::vector<ChainState> frames;
  std::size_t i = 0;
  bool next(ChainState& s) {
    if (i >= frames.size()) return false;
    s = frames[i++];
    return true;
  }
};

// Inverts a_k = (P_k - i w_k Q_k)/sqrt(2 w_k) pairwise, producing the
// Hermitian (Q, P) whose bare normal variables are exactly `a`.
ModeState frame_from_normal(const std::vector<cplx>& a, const std::vector<double>& w, double t) {
  const std::size_t n = a.size();
  ModeState m;
  m.t = t;
  m.Q.assign(n, {0.0, 0.0});
  m.P.assign(n, {0.0, 0.0});
  for (std::size_t k = 1; k < n; ++k) {
    const cplx mirror = std::conj(a[n - k]);
    m.P[k] = std::sqrt(w[k] / 2.0) * (a[k] + mirror);
    m.Q[k] = cplx(0.0, 1.0) * (a[k] - mirror) / std::sqrt(2.0 * w[k]);
  }
  return m;
}

std::vector<cplx> random_phases(std::span<const double> amp, std::uint64_t& rng) {
  std::vector<cplx> a(amp.size(), cplx{0.0, 0.0});
  for (std::size_t k = 1; k < amp.size(); ++k)
    a[k] = std::polar(amp[k], 2.0 * kPi * uniform_unit(rng));
  return a;
}

}  // namespace

TEST_CASE("line fit recovers an exact line") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{0.5, 2.0, 3.5, 5.0, 6.5};
  const auto f = detail::fit_line(x, y);
  CHECK(f.slope == Catch::Approx(1.5).epsilon(1e-14));
  CHECK(f.intercept == Catch::Approx(-1.0).margin(1e-12));
  CHECK(f.r_squared == Catch::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(detail::fit_line(std::vector<double>{1.0}, std::vector<double>{2.0}),
                  parameter_error);
  CHECK_THROWS_AS(detail::fit_line(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
                  parameter_error);
}

TEST_CASE("Rayleigh-Jeans fit indices exclude band edges and band center") {
  const auto idx = detail::rj_fit_indices(128);
  CHECK(idx.size() == 118);
  for (std::size_t k : idx) {
    CHECK(k > 3);
    CHECK(k < 125);
    CHECK((k < 63 || k > 65));
  }
  // Too small for the exclusions: falls back to every mode.
  CHECK(detail::rj_fit_indices(8).size() == 7);
}

TEST_CASE("frame construction inverts the normal-variable definition") {
  const std::size_t n = 16;
  const std::vector<double> w = dispersion_array(n, 1.0);
  std::uint64_t rng = 5;
  std::vector<double> amp(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) amp[k] = 0.3 + 0.1 * static_cast<double>(k);
  const std::vector<cplx> a = random_phases(amp, rng);
  const NormalModeVars got = normal_vars(frame_from_normal(a, w, 0.0), w);
  for (std::size_t k = 1; k < n; ++k) CHECK(std::abs(got.a[k] - a[k]) < 1e-12);
}

TEST_CASE("averaged spectrum recovers an exact Rayleigh-Jeans law") {
  const std::size_t n = 16;
  const double T = 2.5;
  const std::vector<double> w = dispersion_array(n, 1.0);
  std::vector<double> amp(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) amp[k] = std::sqrt(T / w[k]);

  VecModeSource src;
  std::uint64_t rng = 17;
  for (int i = 0; i < 50; ++i)
    src.frames.push_back(frame_from_normal(random_phases(amp, rng), w, 0.1 * i));

  const PowerSpectrum ps = average_power_spectrum(src, Dispersion::bare);
  REQUIRE(ps.n_samples == 50);
  for (std::size_t k = 1; k < n; ++k)
    CHECK(ps.mean_sq_a[k] == Catch::Approx(T / w[k]).epsilon(1e-12));
  CHECK(ps.slope_fit == Catch::Approx(-1.0).margin(1e-9));
  CHECK(ps.temperature_fit == Catch::Approx(T).epsilon(1e-9));
}

TEST_CASE("averaged spectrum validates its input stream") {
  VecModeSource empty;
  CHECK_THROWS_AS(average_power_spectrum(empty, Dispersion::bare), parameter_error);

  const std::vector<double> w8 = dispersion_array(8, 1.0);
  const std::vector<double> w16 = dispersion_array(16, 1.0);
  VecModeSource mixed;
  mixed.frames.push_back(frame_from_normal(std::vector<cplx>(8), w8, 0.0));
  mixed.frames.push_back(frame_from_normal(std::vector<cplx>(16), w16, 0.1));
  CHECK_THROWS_AS(average_power_spectrum(mixed, Dispersion::bare), invalid_modes_error);

  VecModeSource silent;
  silent.frames.push_back(frame_from_normal(std::vector<cplx>(8), w8, 0.0));
  CHECK_THROWS_AS(average_power_spectrum(silent, Dispersion::bare), numerical_error);
}

TEST_CASE("spectrogram peaks sit at the rotation frequencies") {
  const std::size_t n = 16;
  const double eta = 1.4, dt = 0.1;
  const std::vector<double> w = dispersion_array(n, 1.0);

  VecModeSource src;
  std::vector<cplx> a0(n, cplx{0.0, 0.0});
  for (std::size_t k = 1; k < n; ++k) a0[k] = std::polar(1.0 / std::sqrt(w[k]), 0.37 * k);
  for (int i = 0; i < 3000; ++i) {
    const double t = dt * i;
    std::vector<cplx> a(n, cplx{0.0, 0.0});
    for (std::size_t k = 1; k < n; ++k) a[k] = a0[k] * std::polar(1.0, -eta * w[k] * t);
    src.frames.push_back(frame_from_normal(a, w, t));
  }

  WelchOptions opt;
  opt.segment = 1024;
  const SpectrogramResult sg = spectrogram(src, dt, opt);
  REQUIRE(sg.n_segments >= 3);
  REQUIRE(sg.omega_bins.size() == 513);
  for (std::size_t k = 1; k < n; ++k) {
    CHECK(sg.peak_omega[k] == Catch::Approx(eta * w[k]).margin(0.02));
    CHECK(sg.width[k] > 0.0);
    CHECK(sg.width[k] < 5.0 * sg.omega_bins[1]);  // pure tone: a few bins wide
  }

  const EtaMeasurement em = measure_eta(sg);
  CHECK(em.eta_fit == Catch::Approx(eta).margin(0.01));
  CHECK(em.eta_halfband == Catch::Approx(eta).margin(0.01));
}

TEST_CASE("spectrogram rejects records shorter than one segment") {
  const std::size_t n = 8;
  const std::vector<double> w = dispersion_array(n, 1.0);
  VecModeSource src;
  std::uint64_t rng = 3;
  std::vector<double> amp(n, 1.0);
  for (int i = 0; i < 10; ++i)
    src.frames.push_back(frame_from_normal(random_phases(amp, rng), w, 0.1 * i));
  WelchOptions opt;
  opt.segment = 64;
  CHECK_THROWS_AS(spectrogram(src, 0.1, opt), numerical_error);
}

TEST_CASE("eta measurement needs a usable peak set") {
  SpectrogramResult sg;
  sg.n = 8;
  sg.peak_omega.assign(8, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(measure_eta(sg), numerical_error);
}

TEST_CASE("scaling fit recovers an exact power law") {
  std::vector<std::pair<double, double>> pts;
  for (double b : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0})
    pts.emplace_back(b, 1.3 * std::pow(b, 0.2));
  const ScalingFit sf = eta_beta_scaling(pts);
  CHECK(sf.exponent == Catch::Approx(0.2).epsilon(1e-12));
  CHECK(sf.prefactor == Catch::Approx(1.3).epsilon(1e-12));
  CHECK(sf.r_squared == Catch::Approx(1.0).epsilon(1e-12));

  pts.resize(3);
  CHECK_THROWS_AS(eta_beta_scaling(pts), parameter_error);
  std::vector<std::pair<double, double>> narrow{{1, 1}, {2, 1}, {3, 1}, {4, 1}};
  CHECK_THROWS_AS(eta_beta_scaling(narrow), parameter_error);
}

TEST_CASE("nonlinearity ratios of a hand-computed state") {
  // q = (1,0,0,0), p = 0, beta = 4: H2 = 1, H4 = 2. All |Q_k|^2 = 1/4, so
  // the quadratic form at eta scales as eta^2: H~2 = eta^2, H~4 = 3 - eta^2.
  ChainState s;
  s.q = {1, 0, 0, 0};
  s.p = {0, 0, 0, 0};
  VecTrajSource src;
  src.frames.push_back(s);
  const NonlinearityRatios r = nonlinearity_ratios(src, {4, 4.0, 1.0}, std::sqrt(2.0));
  CHECK(r.n_samples == 1);
  CHECK(r.h4_over_h2 == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(r.h4t_over_h2t == Catch::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("quartic mode sums match brute-force enumeration") {
  const std::size_t n = 8;
  const double beta = 1.7;
  const ModeState m = to_modes(random_initial_state({n, beta, 6.0}, 23));

  std::vector<cplx> R(n, cplx{0.0, 0.0});
  for (std::size_t k = 1; k < n; ++k)
    R[k] = m.Q[k] * (cplx{1.0, 0.0} - std::polar(1.0, 2.0 * kPi * k / n));
  cplx total{0.0, 0.0}, resonant{0.0, 0.0};
  for (std::size_t k1 = 1; k1 < n; ++k1)
    for (std::size_t k2 = 1; k2 < n; ++k2)
      for (std::size_t k3 = 1; k3 < n; ++k3)
        for (std::size_t k4 = 1; k4 < n; ++k4) {
          const std::size_t sum = k1 + k2 + k3 + k4;
          if (sum % n != 0) continue;
          const cplx term = R[k1] * R[k2] * R[k3] * R[k4];
          total += term;
          if (sum == 2 * n) resonant += term;
        }
  const double scale = beta / (4.0 * n);

  const QuarticDecomposition d = quartic_mode_sums(m, beta);
  CHECK(d.total == Catch::Approx(scale * total.real()).epsilon(1e-12));
  CHECK(d.resonant == Catch::Approx(scale * resonant.real()).epsilon(1e-12));
  CHECK(d.total ==
        Catch::Approx(total_energy(from_modes(m), {n, beta, 6.0}).h4).epsilon(1e-10));
}

TEST_CASE("a single zone-boundary mode is purely resonant") {
  const std::size_t n = 8;
  ModeState m;
  m.Q.assign(n, {0.0, 0.0});
  m.P.assign(n, {0.0, 0.0});
  m.Q[n / 2] = cplx{0.9, 0.0};  // self-conjugate slot must be real
  const QuarticDecomposition d = quartic_mode_sums(m, 2.0);
  CHECK(d.total > 0.0);
  CHECK(d.resonant == Catch::Approx(d.total).epsilon(1e-12));
}

TEST_CASE("resonant fraction averages the sampled frames") {
  const std::size_t n = 8;
  const ModeState m = to_modes(random_initial_state({n, 1.0, 6.0}, 31));
  const QuarticDecomposition d = quartic_mode_sums(m, 1.0);
  VecModeSource src;
  for (int i = 0; i < 7; ++i) src.frames.push_back(m);
  const double frac = resonant_quartic_fraction(src, 1.0);
  CHECK(frac == Catch::Approx(std::abs(d.resonant) / std::abs(d.total)).epsilon(1e-12));

  VecModeSource again;
  again.frames.push_back(m);
  CHECK_THROWS_AS(resonant_quartic_fraction(again, 0.0), parameter_error);
}

TEST_CASE("demodulated phase is flat at the true frequency and ramps off it") {
  // Only modes below n/2 are excited: the record extracts a one-sided
  // a_k = (P_k - i w Q_k)/sqrt(2w), and a populated mirror mode would add a
  // counter-rotating term. With the mirror empty the extraction rescales the
  // amplitude by c+ = (sqrt(eta) + 1/sqrt(eta))/2 and keeps the rotation.
  const std::size_t n = 16, k = 5;
  const double eta = 1.4, dt = 0.05;
  const std::vector<double> w = dispersion_array(n, 1.0);
  const double w_true = eta * w[k];

  VecModeSource src;
  for (int i = 0; i < 400; ++i) {
    const double t = dt * i;
    std::vector<cplx> a(n, cplx{0.0, 0.0});
    for (std::size_t j = 1; j < n / 2; ++j)
      a[j] = std::polar(0.8, 0.2 * j) * std::polar(1.0, -eta * w[j] * t);
    src.frames.push_back(frame_from_normal(a, w, t));
  }

  const double c_plus = 0.5 * (std::sqrt(eta) + 1.0 / std::sqrt(eta));
  const ModeEvolution flat = mode_evolution_record(src, k, Dispersion::renormalized, eta);
  REQUIRE(flat.t.size() == 400);
  CHECK(flat.omega_demod == Catch::Approx(w_true).epsilon(1e-14));
  for (std::size_t i = 0; i < flat.t.size(); ++i) {
    CHECK(std::abs(flat.phase[i] - flat.phase[0]) < 1e-9);
    CHECK(flat.amplitude[i] == Catch::Approx(c_plus * 0.8).epsilon(1e-12));
  }

  src.i = 0;
  const double eta_wrong = 1.54;
  const ModeEvolution ramp = mode_evolution_record(src, k, Dispersion::renormalized, eta_wrong);
  const auto fit = detail::fit_line(ramp.t, ramp.phase);
  CHECK(fit.slope == Catch::Approx((eta_wrong - eta) * w[k]).margin(1e-9));
}

TEST_CASE("near-resonance quartet counts at reference sizes") {
  for (std::size_t n : {4ul, 8ul}) {
    std::vector<double> w(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) w[k] = bare_dispersion(n, k);
    const std::uint64_t tiny = near_resonance_count(n, w, 1e-12);
    const std::uint64_t all = near_resonance_count(n, w, 10.0);
    if (n == 4) {
      CHECK(tiny == 15);  // permutation-trivial quartets only
      CHECK(all == 19);   // every momentum-conserving quartet
    } else {
      CHECK(tiny == 91);
      CHECK(all == 231);
    }
    CHECK(near_resonance_count(n, w, 0.05) >= tiny);
  }
  std::vector<double> w(8, 1.0);
  CHECK_THROWS_AS(near_resonance_count(8, w, 0.0), parameter_error);
  CHECK_THROWS_AS(near_resonance_count(4, w, 0.1), parameter_error);
}
