// Acceptance suite for the chain simulator and its spectral toolkit.
// Runs full-scale simulations (N = 128, H = 200), evaluates eight
// criteria with pinned tolerances, and prints one [PASS]/[FAIL] line per
// criterion. Exit status 0 only if every criterion holds.
//
// Usage: acceptance <fpu-binary> <scratch-dir>

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <fpu/fpu.hpp>

namespace fs = std::filesystem;
using namespace fpu;

namespace {

// Full-scale run geometry shared by the sweep criteria.
constexpr std::size_t kN = 128;
constexpr double kEnergy = 200.0;
constexpr double kDt = 0.01;
// Sampling every 0.25 time units keeps the Nyquist frequency (4 pi) above
// the stiffened band edge at the strongest coupling while a 1e5-unit
// averaging window stays within the disk budget.
constexpr std::size_t kStride = 25;
constexpr double kTransient = 5e4;
constexpr double kRecord = 1e5;
constexpr std::uint64_t kMasterSeed = 0xACCE;

// Pinned tolerances.
constexpr double kSlopeTol = 0.10;        // spectrum slope within -1 +- 0.10
constexpr double kTempSpreadTol = 0.50;   // relative spread of fitted T across beta
constexpr double kBandEdgeTarget = 3.30;  // renormalized band-edge frequency at beta = 1
constexpr double kBandEdgeTol = 0.15;
constexpr double kLocusRmsTol = 0.05;     // rms misfit of peaks to a single-eta locus
constexpr double kExponentTarget = 0.20;  // eta ~ beta^p
constexpr double kExponentTol = 0.05;
constexpr double kEtaRelDiffTol = 0.20;   // measured vs analytic eta
constexpr double kResonantFracMin = 0.70;
constexpr double kQuarticIdentityTol = 1e-8;
constexpr double kOmegaCut = 7.0;
constexpr double kBreatherBeta = 25.0;
constexpr double kBreatherRecord = 2e4;
constexpr double kTracksPerTime = 1e-4;   // >= 1 qualifying track per 1e4 time units
constexpr std::size_t kBreatherSpanMax = 5;
constexpr double kBreatherLifePeriods = 10.0;

int g_failed = 0;

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

RunConfig sweep_config(double beta, std::uint64_t run_index, const std::string& dir) {
  RunConfig cfg;
  cfg.n = kN;
  cfg.beta = beta;
  cfg.target_energy = kEnergy;
  cfg.dt = kDt;
  cfg.sample_stride = kStride;
  cfg.t_transient = kTransient;
  cfg.t_record = kRecord;
  cfg.seed = derive_run_seed(kMasterSeed, run_index);
  cfg.output_dir = dir;
  return cfg;
}

void drop_records(const std::string& dir) {
  fs::remove(fs::path(dir) / "trajectory.bin");
  fs::remove(fs::path(dir) / "modes.bin");
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Median over disjoint windows of the net phase change across each window.
double median_window_drift(const ModeEvolution& ev, std::size_t window_samples) {
  std::vector<double> drifts;
  for (std::size_t i0 = 0; i0 + window_samples <= ev.phase.size(); i0 += window_samples)
    drifts.push_back(std::abs(ev.phase[i0 + window_samples - 1] - ev.phase[i0]));
  return median_of(std::move(drifts));
}

struct BetaPoint {
  double beta = 0.0;
  double eta_measured = 0.0;
  double eta_analytic = 0.0;
  double h4_h2 = 0.0;
  double h4t_h2t = 0.0;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: acceptance <fpu-binary> <scratch-dir>\n");
    return 2;
  }
  const std::string fpu_bin = argv[1];
  const std::string scratch = argv[2];
  fs::create_directories(scratch);

  try {
    const std::vector<double> betas{1, 2, 4, 8, 16, 32, 64, 128};
    std::vector<BetaPoint> pts;

    // Spectrum fits collected at the three reference couplings.
    std::vector<double> rj_slopes, rj_temps, rj_betas;

    // beta = 1 extras.
    double edge_peak = 0.0, locus_rms = 0.0, resonant_frac = 0.0;
    double drift_renorm = 0.0, drift_bare = 0.0;

    for (std::size_t i = 0; i < betas.size(); ++i) {
      const double beta = betas[i];
      const std::string dir = scratch + "/beta_" + std::to_string(static_cast<int>(beta));
      std::fprintf(stderr, "acceptance: beta %g: simulating...\n", beta);
      const RunConfig cfg = sweep_config(beta, i, dir);
      run_simulation(cfg, &std::cerr);

      const DispersionResult disp = run_dispersion(dir, dir);
      // The energy split uses the analytic stiffening factor: that is the
      // value the renormalization construction itself defines, and it keeps
      // the split independent of the spectrogram pass.
      const RatiosResult ratios = run_ratios(dir, dir, disp.analytic.eta_analytic);

      BetaPoint pt;
      pt.beta = beta;
      pt.eta_measured = disp.measured.eta_fit;
      pt.eta_analytic = disp.analytic.eta_analytic;
      pt.h4_h2 = ratios.row.h4_h2;
      pt.h4t_h2t = ratios.row.h4t_h2t;
      pts.push_back(pt);
      std::fprintf(stderr, "acceptance: beta %g: eta %.4f (analytic %.4f), H4/H2 %.4f -> %.4f\n",
                   beta, pt.eta_measured, pt.eta_analytic, pt.h4_h2, pt.h4t_h2t);

      if (beta == 1.0 || beta == 8.0 || beta == 32.0) {
        ModeReader mr(dir + "/modes.bin");
        const PowerSpectrum ps =
            average_power_spectrum(mr, Dispersion::renormalized, pt.eta_measured);
        rj_betas.push_back(beta);
        rj_slopes.push_back(ps.slope_fit);
        rj_temps.push_back(ps.temperature_fit);
      }

      if (beta == 1.0) {
        const SpectrogramResult& sg = disp.spectrogram;
        edge_peak = sg.peak_omega[kN / 2];
        double acc = 0.0;
        for (std::size_t k = 1; k < kN; ++k) {
          const double target = pt.eta_measured * bare_dispersion(kN, k);
          const double rel = (sg.peak_omega[k] - target) / target;
          acc += rel * rel;
        }
        locus_rms = std::sqrt(acc / static_cast<double>(kN - 1));

        {
          ModeReader mr(dir + "/modes.bin");
          resonant_frac = resonant_quartic_fraction(mr, beta);
        }

        const std::size_t k_probe = 20;
        const double w_probe = pt.eta_measured * bare_dispersion(kN, k_probe);
        const double window_t = kBreatherLifePeriods * 2.0 * kPi / w_probe;
        const auto window_samples = static_cast<std::size_t>(
            std::llround(window_t / (kDt * static_cast<double>(kStride))));
        {
          ModeReader mr(dir + "/modes.bin");
          const ModeEvolution ev =
              mode_evolution_record(mr, k_probe, Dispersion::renormalized, pt.eta_measured);
          drift_renorm = median_window_drift(ev, window_samples);
        }
        {
          ModeReader mr(dir + "/modes.bin");
          const ModeEvolution ev = mode_evolution_record(mr, k_probe, Dispersion::bare);
          drift_bare = median_window_drift(ev, window_samples);
        }
      }
      drop_records(dir);
    }

    // C1: thermal mode spectra follow the 1/omega equilibrium law with one
    // temperature scale across couplings.
    {
      bool ok = true;
      for (double s : rj_slopes) ok = ok && std::abs(s + 1.0) <= kSlopeTol;
      for (double t : rj_temps) ok = ok && t > 0.0;
      double tmin = rj_temps[0], tmax = rj_temps[0], tsum = 0.0;
      for (double t : rj_temps) {
        tmin = std::min(tmin, t);
        tmax = std::max(tmax, t);
        tsum += t;
      }
      const double spread = (tmax - tmin) / (tsum / static_cast<double>(rj_temps.size()));
      ok = ok && spread <= kTempSpreadTol;
      report(ok, "C1 equilibrium spectra",
             fmt("slopes %.3f/%.3f/%.3f at beta %g/%g/%g (need -1 +- %.2f), "
                 "T %.3f/%.3f/%.3f spread %.3f (need <= %.2f)",
                 rj_slopes[0], rj_slopes[1], rj_slopes[2], rj_betas[0], rj_betas[1], rj_betas[2],
                 kSlopeTol, rj_temps[0], rj_temps[1], rj_temps[2], spread, kTempSpreadTol));
    }

    // C2: the measured dispersion is the bare curve stiffened by a single
    // factor, pinned by the band-edge peak position at beta = 1.
    {
      const bool edge_ok = std::abs(edge_peak - kBandEdgeTarget) <= kBandEdgeTol;
      const bool locus_ok = locus_rms <= kLocusRmsTol;
      report(edge_ok && locus_ok, "C2 renormalized dispersion",
             fmt("band-edge peak %.3f (need %.2f +- %.2f), single-eta locus rms %.4f "
                 "(need <= %.2f)",
                 edge_peak, kBandEdgeTarget, kBandEdgeTol, locus_rms, kLocusRmsTol));
    }

    // C3: the stiffening factor grows as beta^0.2, measured and analytic,
    // with the measured value the larger of the two but within 20%.
    {
      std::vector<std::pair<double, double>> pm, pa;
      bool order_ok = true, close_ok = true;
      for (const BetaPoint& p : pts) {
        pm.emplace_back(p.beta, p.eta_measured);
        pa.emplace_back(p.beta, p.eta_analytic);
        order_ok = order_ok && p.eta_measured >= p.eta_analytic;
        close_ok =
            close_ok && (p.eta_measured - p.eta_analytic) / p.eta_measured <= kEtaRelDiffTol;
      }
      const ScalingFit fm = eta_beta_scaling(pm);
      const ScalingFit fa = eta_beta_scaling(pa);
      const bool exp_ok = std::abs(fm.exponent - kExponentTarget) <= kExponentTol &&
                          std::abs(fa.exponent - kExponentTarget) <= kExponentTol;
      report(exp_ok && order_ok && close_ok, "C3 stiffening exponent",
             fmt("eta ~ beta^%.3f measured, beta^%.3f analytic (need %.2f +- %.2f); "
                 "measured >= analytic %s, max rel gap within %.2f %s",
                 fm.exponent, fa.exponent, kExponentTarget, kExponentTol,
                 order_ok ? "yes" : "NO", kEtaRelDiffTol, close_ok ? "yes" : "NO"));
    }

    // C4: splitting the energy against the stiffened dispersion absorbs the
    // bulk of the quartic term at every coupling, and both shares grow with
    // beta. The leftover is compared in magnitude: the stiffened quadratic
    // absorbs the Gaussian part of the quartic exactly, so the residual is
    // the (sign-indefinite, here negative) non-Gaussian correction.
    {
      bool absorb_ok = true, mono_ok = true;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        absorb_ok = absorb_ok && std::abs(pts[i].h4t_h2t) < pts[i].h4_h2;
        if (i > 0) {
          mono_ok = mono_ok && pts[i].h4_h2 > pts[i - 1].h4_h2 &&
                    std::abs(pts[i].h4t_h2t) > std::abs(pts[i - 1].h4t_h2t);
        }
      }
      report(absorb_ok && mono_ok, "C4 renormalized quartic share",
             fmt("|H~4|/H~2 < H4/H2 at all beta %s; both monotone in beta %s "
                 "(beta 1: %.4f -> %+.4f, beta 128: %.4f -> %+.4f)",
                 absorb_ok ? "yes" : "NO", mono_ok ? "yes" : "NO", pts.front().h4_h2,
                 pts.front().h4t_h2t, pts.back().h4_h2, pts.back().h4t_h2t));
    }

    // C5: the momentum-conserving 2N channel carries most of the quartic
    // energy, and the mode-space decomposition reproduces the site-space
    // quartic term exactly on a small chain.
    {
      const ChainState probe = random_initial_state({32, 1.0, 50.0}, 99);
      const ModeState pm = to_modes(probe);
      const QuarticDecomposition qd = quartic_mode_sums(pm, 1.0);
      const double site_h4 = total_energy(probe, {32, 1.0, 50.0}).h4;
      const double rel = std::abs(qd.total - site_h4) / site_h4;
      const bool frac_ok = resonant_frac >= kResonantFracMin;
      const bool ident_ok = rel <= kQuarticIdentityTol;
      report(frac_ok && ident_ok, "C5 resonant channel dominance",
             fmt("resonant fraction %.3f at beta 1 (need >= %.2f); mode/site quartic "
                 "identity rel %.2e at N = 32 (need <= %.0e)",
                 resonant_frac, kResonantFracMin, rel, kQuarticIdentityTol));
    }

    // C6: over ten periods, phase demodulated at the stiffened frequency
    // drifts by less than one half-turn while bare demodulation wraps.
    {
      const bool ok = drift_renorm < kPi && drift_bare > kPi;
      report(ok, "C6 phase coherence",
             fmt("median 10-period net phase drift %.2f rad renormalized (need < pi), "
                 "%.2f rad bare (need > pi)",
                 drift_renorm, drift_bare));
    }

    // C7: with strong coupling, high-pass filtering exposes localized
    // excitations that persist for many of their own periods; the harmonic
    // control shows none. (A longer-chain variant is out of scope here.)
    {
      std::fprintf(stderr, "acceptance: breather run (beta %g)...\n", kBreatherBeta);
      const std::string bdir = scratch + "/breather";
      RunConfig bcfg = sweep_config(kBreatherBeta, 100, bdir);
      bcfg.t_transient = 1e4;
      bcfg.t_record = kBreatherRecord;
      bcfg.sample_stride = 10;  // several samples per filtered-band period
      bcfg.omega_cut = kOmegaCut;
      run_simulation(bcfg, &std::cerr);
      const BreatherRun br = run_breathers(bdir, bdir, {kOmegaCut}, {}, false);
      drop_records(bdir);

      std::size_t qualifying = 0;
      for (const BreatherTrack& t : br.tracks) {
        if (t.max_span > kBreatherSpanMax || !(t.mean_frequency > 0.0)) continue;
        const double life = t.t_end - t.t_start;
        if (life >= kBreatherLifePeriods * 2.0 * kPi / t.mean_frequency) ++qualifying;
      }
      const auto needed = static_cast<std::size_t>(kBreatherRecord * kTracksPerTime);

      std::fprintf(stderr, "acceptance: control run (beta 0)...\n");
      const std::string cdir = scratch + "/control";
      RunConfig ccfg = sweep_config(0.0, 101, cdir);
      ccfg.t_transient = 1e4;
      ccfg.t_record = kBreatherRecord;
      ccfg.sample_stride = 10;
      ccfg.omega_cut = kOmegaCut;
      run_simulation(ccfg, &std::cerr);
      const BreatherRun ctrl = run_breathers(cdir, cdir, {kOmegaCut}, {}, false);
      drop_records(cdir);

      const bool ok = qualifying >= needed && ctrl.tracks.empty();
      report(ok, "C7 breather persistence",
             fmt("%zu qualifying tracks of %zu total at beta %g over %.0f time units "
                 "(need >= %zu with span <= %zu, life >= %.0f periods); harmonic control "
                 "tracks %zu (need 0)",
                 qualifying, br.tracks.size(), kBreatherBeta, kBreatherRecord, needed,
                 kBreatherSpanMax, kBreatherLifePeriods, ctrl.tracks.size()));
    }

    // C8: the shipped binary's self-check verb passes at the full-scale
    // default configuration.
    {
      const std::string log = scratch + "/verify.log";
      const std::string cmd = fpu_bin + " verify > " + log + " 2>&1";
      const int status = std::system(cmd.c_str());
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
      report(code == 0, "C8 self-checks",
             fmt("'%s verify' exit code %d (need 0, log at %s)", fpu_bin.c_str(), code,
                 log.c_str()));
    }
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 1;
  }

  if (g_failed == 0) {
    std::printf("acceptance: all 8 criteria hold\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", g_failed);
  return 1;
}
