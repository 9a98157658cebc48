#pragma once

// End-to-end runs: simulate a chain into record files, then the derived
// analyses (spectra, dispersion, ratios, mode tracks, breathers, beta sweeps).
// Each run_* function owns one output contract; the CLI is a thin shell over
// these. All of them throw the fpu error taxonomy on failure.

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include "fpu/config.hpp"

namespace fpu {

namespace detail {

inline std::string record_path(const std::string& dir, const char* name) {
  const std::string p = dir + "/" + name;
  if (!std::filesystem::exists(p)) throw io_error("missing record file: " + p);
  return p;
}

inline void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory: " + dir);
}

// eta_analytic stored by a previous simulate run, if a manifest is present.
inline std::optional<double> manifest_eta(const std::string& records_dir) {
  const std::string p = records_dir + "/manifest.json";
  if (!std::filesystem::exists(p)) return std::nullopt;
  const nlohmann::json j = load_manifest_json(p);
  if (!j.contains("eta_analytic")) return std::nullopt;
  return j["eta_analytic"].get<double>();
}

}  // namespace detail

// Harmonic mode energies spread this evenly across the band are treated as
// thermalized. A freshly drawn Gaussian state sits near 0.55; a relaxed
// thermal state sits above 0.95.
inline constexpr double kThermalizedEquipartition = 0.8;

struct SimulationResult {
  std::string dir;
  RunManifest manifest;
  ChainState final_state;
};

// Transient, then a recorded window writing trajectory.bin + modes.bin and
// the final-state CSV snapshots. Streaming accumulators feed the manifest:
// energy drift over the recorded window, <|Q_l|^2> for eta_analytic, and the
// equipartition indicator of the harmonic mode energies.
inline SimulationResult run_simulation(const RunConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  const ChainParams params = cfg.chain();
  detail::ensure_dir(cfg.output_dir);
  const auto wall_start = std::chrono::steady_clock::now();

  RunManifest mf;
  mf.config = cfg;
  mf.started_at = iso8601_utc_now();

  ChainState state = random_initial_state(params, cfg.seed);
  if (cfg.t_transient > 0.0) {
    if (log) *log << "transient to t = " << cfg.t_transient << "\n";
    state = advance(std::move(state), params, cfg.dt, cfg.t_transient);
  }

  const double e_ref = total_energy(state, params).total;
  const std::size_t n = params.n;
  std::vector<double> omega = dispersion_array(n, 1.0);
  std::vector<double> sum_q_sq(n, 0.0), sum_mode_e(n, 0.0);
  // Linear-fit accumulators for the secular energy trend, in shifted
  // coordinates t' = t - t_start, h' = (H - H_ref)/H_ref for conditioning.
  double max_dev = 0.0, sum_t = 0.0, sum_tt = 0.0, sum_h = 0.0, sum_th = 0.0;
  const double t_rec_start = state.t;
  double t_last = state.t;
  std::size_t n_acc = 0;

  {
    TrajectoryWriter traj(cfg.output_dir + "/trajectory.bin", n, cfg.beta, cfg.dt,
                          cfg.sample_stride);
    ModeWriter modes(cfg.output_dir + "/modes.bin", n, cfg.beta, cfg.dt, cfg.sample_stride);
    ModeState m;
    const auto sink = [&](const ChainState& s) {
      m = to_modes(s);
      traj.write(s);
      modes.write(m);
      const double tp = s.t - t_rec_start;
      const double hp = (total_energy(s, params).total - e_ref) / e_ref;
      max_dev = std::max(max_dev, std::abs(hp));
      sum_t += tp;
      sum_tt += tp * tp;
      sum_h += hp;
      sum_th += tp * hp;
      t_last = s.t;
      for (std::size_t k = 1; k < n; ++k) {
        const double qq = std::norm(m.Q[k]);
        sum_q_sq[k] += qq;
        sum_mode_e[k] += 0.5 * (std::norm(m.P[k]) + omega[k] * omega[k] * qq);
      }
      ++n_acc;
    };
    if (log) *log << "recording " << cfg.t_record << " time units\n";
    state = integrate(std::move(state), params, cfg.dt, state.t + cfg.t_record,
                      cfg.sample_stride, sink);
    traj.close();
    modes.close();
  }

  std::vector<double> mean_q_sq(n, 0.0), mean_mode_e(n - 1, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    mean_q_sq[k] = sum_q_sq[k] / static_cast<double>(n_acc);
    mean_mode_e[k - 1] = sum_mode_e[k] / static_cast<double>(n_acc);
  }
  const RenormReport rr = eta_analytic(mean_q_sq, cfg.beta, n);

  write_state_csv(cfg.output_dir + "/state.csv", state, site_energy_density(state, params));
  write_modes_snapshot_csv(cfg.output_dir + "/modes.csv", to_modes(state));
  cfg.save(cfg.output_dir + "/run.cfg");

  const double count = static_cast<double>(n_acc);
  const double denom = count * sum_tt - sum_t * sum_t;
  const double slope = denom > 0.0 ? (count * sum_th - sum_t * sum_h) / denom : 0.0;
  mf.h_drift_relative = std::abs(slope) * (t_last - t_rec_start);
  mf.h_dev_max_relative = max_dev;
  mf.equipartition = equipartition_indicator(mean_mode_e);
  mf.thermalized = mf.equipartition >= kThermalizedEquipartition;
  mf.eta_analytic = rr.eta_analytic;
  for (const char* f : {"trajectory.bin", "modes.bin", "state.csv", "modes.csv", "run.cfg"})
    mf.add_file(cfg.output_dir, f);
  mf.finished_at = iso8601_utc_now();
  mf.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  mf.save(cfg.output_dir + "/manifest.json");

  if (log) {
    *log << "drift " << mf.h_drift_relative << " (max dev " << max_dev << "), equipartition "
         << mf.equipartition << ", eta_analytic " << rr.eta_analytic
         << (mf.thermalized ? "" : "  [not thermalized]") << "\n";
  }
  return {cfg.output_dir, std::move(mf), std::move(state)};
}

// Time-averaged <|a_k|^2> against the chosen dispersion, with the
// Rayleigh-Jeans temperature and slope fits. When the renormalized abscissa
// is requested without an explicit eta, the manifest's analytic value is
// used.
inline PowerSpectrum run_spectrum(const std::string& records_dir, const std::string& out_dir,
                                  Dispersion used, std::optional<double> eta_opt = std::nullopt) {
  double eta = 1.0;
  if (used == Dispersion::renormalized) {
    if (eta_opt)
      eta = *eta_opt;
    else if (const auto m = detail::manifest_eta(records_dir))
      eta = *m;
    else
      throw parameter_error("spectrum: renormalized dispersion needs --eta (no manifest found)");
  }
  ModeReader reader(detail::record_path(records_dir, "modes.bin"));
  const PowerSpectrum ps = average_power_spectrum(reader, used, eta);
  detail::ensure_dir(out_dir);
  write_spectrum_csv(out_dir + "/spectrum.csv", ps);
  return ps;
}

struct DispersionResult {
  SpectrogramResult spectrogram;
  EtaMeasurement measured;
  RenormReport analytic;
  double beta = 0.0;
};

// Two passes over modes.bin: averaged <|Q_l|^2> for the analytic eta, then
// the Welch spectrogram for the measured peak locus.
inline DispersionResult run_dispersion(const std::string& records_dir, const std::string& out_dir,
                                       WelchOptions opt = {}) {
  ModeReader reader(detail::record_path(records_dir, "modes.bin"));
  const std::size_t n = reader.n();
  const double beta = reader.beta();

  std::vector<double> sum_q_sq(n, 0.0);
  std::size_t count = 0;
  ModeState m;
  while (reader.next(m)) {
    for (std::size_t k = 1; k < n; ++k) sum_q_sq[k] += std::norm(m.Q[k]);
    ++count;
  }
  if (count == 0) throw io_error("dispersion: empty mode record");
  for (auto& v : sum_q_sq) v /= static_cast<double>(count);

  DispersionResult out;
  out.beta = beta;
  out.analytic = eta_analytic(sum_q_sq, beta, n);
  reader.reset();
  out.spectrogram = spectrogram(reader, reader.dt_sample(), opt);
  out.measured = measure_eta(out.spectrogram);

  detail::ensure_dir(out_dir);
  write_spectrogram_csv(out_dir + "/spectrogram.csv", out.spectrogram);
  write_peaks_csv(out_dir + "/peaks.csv", out.spectrogram);
  const EtaRow row{beta, out.measured.eta_fit, out.analytic.eta_analytic};
  write_eta_csv(out_dir + "/eta.csv", std::span<const EtaRow>(&row, 1));
  return out;
}

struct RatiosResult {
  RatioRow row;
  NonlinearityRatios detail;
  double eta_used = 1.0;
};

// Site-space and renormalized-quadratic nonlinearity ratios. Without an
// explicit eta the measured value from a spectrogram pass is used, so the
// tilde split reflects the dispersion the record actually exhibits.
inline RatiosResult run_ratios(const std::string& records_dir, const std::string& out_dir,
                               std::optional<double> eta_opt = std::nullopt,
                               WelchOptions opt = {}) {
  TrajectoryReader traj(detail::record_path(records_dir, "trajectory.bin"));
  const ChainParams params{traj.n(), traj.beta(), 1.0};

  double eta = 1.0;
  if (eta_opt) {
    eta = *eta_opt;
  } else {
    ModeReader reader(detail::record_path(records_dir, "modes.bin"));
    eta = measure_eta(spectrogram(reader, reader.dt_sample(), opt)).eta_fit;
  }

  RatiosResult out;
  out.eta_used = eta;
  out.detail = nonlinearity_ratios(traj, params, eta);
  out.row = {params.beta, out.detail.h4_over_h2, out.detail.h4t_over_h2t};
  detail::ensure_dir(out_dir);
  write_ratios_csv(out_dir + "/ratios.csv", std::span<const RatioRow>(&out.row, 1));
  return out;
}

// Amplitude and demodulated phase of one mode. Renormalized demodulation
// without an explicit eta measures it from the record first.
inline ModeEvolution run_modes(const std::string& records_dir, const std::string& out_path,
                               std::size_t k, Dispersion used,
                               std::optional<double> eta_opt = std::nullopt,
                               WelchOptions opt = {}) {
  ModeReader reader(detail::record_path(records_dir, "modes.bin"));
  double eta = 1.0;
  if (used == Dispersion::renormalized) {
    if (eta_opt) {
      eta = *eta_opt;
    } else {
      eta = measure_eta(spectrogram(reader, reader.dt_sample(), opt)).eta_fit;
      reader.reset();
    }
  }
  const ModeEvolution ev = mode_evolution_record(reader, k, used, eta);
  write_mode_evolution_csv(out_path, ev);
  return ev;
}

struct BreatherRun {
  FilteredField field;
  std::vector<BreatherTrack> tracks;
  BreatherStats stats;
};

// High-pass filter the displacement record, track localized excitations, and
// write qf.bin plus breathers.csv. The site-energy matrix from a second pass
// over the trajectory supplies peak_energy for each track.
inline BreatherRun run_breathers(const std::string& records_dir, const std::string& out_dir,
                                 FilterSpec spec = {}, TrackThresholds th = {},
                                 bool write_field = true) {
  TrajectoryReader traj(detail::record_path(records_dir, "trajectory.bin"));
  const std::size_t n = traj.n();
  const ChainParams params{n, traj.beta(), 1.0};

  BreatherRun out{filtered_displacement(traj, spec), {}, {}};
  const std::size_t m = out.field.n_samples;

  std::vector<double> energy(n * m, 0.0);
  traj.reset();
  ChainState s;
  std::size_t i = 0;
  while (traj.next(s)) {
    const SiteEnergyField e = site_energy_density(s, params);
    for (std::size_t site = 0; site < n; ++site) energy[site * m + i] = e.e[site];
    ++i;
  }
  if (i != m) throw io_error("breathers: trajectory length changed between passes");

  out.tracks = track_breathers(out.field, energy, th);
  out.stats = breather_statistics(out.tracks, static_cast<double>(m) * out.field.dt_sample, n);

  detail::ensure_dir(out_dir);
  if (write_field) {
    FieldWriter fw(out_dir + "/qf.bin", n, traj.beta(), traj.dt(), traj.stride());
    fw.write_field(out.field);
    fw.close();
  }
  write_breathers_csv(out_dir + "/breathers.csv", out.tracks);
  return out;
}

struct SweepResult {
  std::vector<EtaRow> eta_rows;
  std::vector<RatioRow> ratio_rows;
  ScalingFit scaling;
  bool scaling_fitted = false;
};

inline std::vector<double> default_sweep_betas() { return {1, 2, 4, 8, 16, 32, 64, 128}; }

// One full simulate + dispersion + ratios per beta, in out_root/beta_<b>/.
// Seeds derive from the master seed by run index; record files are deleted
// after analysis unless keep_records. The aggregate eta.csv / ratios.csv and
// the log-log scaling fit of measured eta against beta land in out_root.
inline SweepResult run_sweep(const RunConfig& base, std::vector<double> betas,
                             const std::string& out_root, bool keep_records = false,
                             std::size_t threads = 1, WelchOptions welch = {},
                             std::ostream* log = nullptr) {
  if (betas.empty()) betas = default_sweep_betas();
  std::sort(betas.begin(), betas.end());
  for (double b : betas)
    if (!(b >= 0.0)) throw parameter_error("sweep: beta values must be >= 0");
  detail::ensure_dir(out_root);
  threads = std::clamp<std::size_t>(threads, 1, betas.size());

  SweepResult out;
  out.eta_rows.resize(betas.size());
  out.ratio_rows.resize(betas.size());

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr first_error;

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= betas.size()) return;
      try {
        RunConfig cfg = base;
        cfg.beta = betas[i];
        cfg.seed = derive_run_seed(base.seed, i);
        char tag[32];
        std::snprintf(tag, sizeof tag, "beta_%g", betas[i]);
        cfg.output_dir = out_root + "/" + tag;
        {
          std::lock_guard<std::mutex> lk(log_mutex);
          if (log) *log << tag << ": simulate\n";
        }
        run_simulation(cfg);
        const DispersionResult d = run_dispersion(cfg.output_dir, cfg.output_dir, welch);
        const RatiosResult r = run_ratios(cfg.output_dir, cfg.output_dir, d.measured.eta_fit);
        out.eta_rows[i] = {betas[i], d.measured.eta_fit, d.analytic.eta_analytic};
        out.ratio_rows[i] = r.row;
        if (!keep_records) {
          std::filesystem::remove(cfg.output_dir + "/trajectory.bin");
          std::filesystem::remove(cfg.output_dir + "/modes.bin");
        }
        std::lock_guard<std::mutex> lk(log_mutex);
        if (log)
          *log << tag << ": eta " << d.measured.eta_fit << " (analytic "
               << d.analytic.eta_analytic << "), h4/h2 " << r.row.h4_h2 << "\n";
      } catch (...) {
        std::lock_guard<std::mutex> lk(log_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(betas.size());
        return;
      }
    }
  };

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  write_eta_csv(out_root + "/eta.csv", out.eta_rows);
  write_ratios_csv(out_root + "/ratios.csv", out.ratio_rows);

  std::vector<std::pair<double, double>> pts;
  for (const auto& r : out.eta_rows)
    if (r.beta > 0.0) pts.emplace_back(r.beta, r.eta_measured);
  try {
    out.scaling = eta_beta_scaling(pts);
    out.scaling_fitted = true;
  } catch (const parameter_error&) {
    out.scaling_fitted = false;
  }
  return out;
}

}  // namespace fpu
