// Command-line front end. Every verb is a thin wrapper over one run_*
// function; all real work lives in the headers. Exit codes: 0 success,
// 2 configuration or usage error, 3 numerical failure (including failed
// verify checks), 4 I/O error.

#include <cstdlib>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include <fpu/fpu.hpp>

namespace {

fpu::RunConfig base_config(const std::string& config_path) {
  return config_path.empty() ? fpu::RunConfig{} : fpu::RunConfig::load(config_path);
}

std::vector<double> parse_beta_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = std::min(csv.find(',', pos), csv.size());
    const std::string tok = csv.substr(pos, comma - pos);
    if (!tok.empty()) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      while (end && *end == ' ') ++end;
      if (end == tok.c_str() || *end != '\0')
        throw fpu::parameter_error("malformed beta list entry: '" + tok + "'");
      out.push_back(v);
    }
    pos = comma + 1;
  }
  if (out.empty()) throw fpu::parameter_error("empty beta list");
  return out;
}

std::size_t sweep_threads() {
  const char* v = std::getenv("FPU_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long t = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || t < 1)
    throw fpu::parameter_error("FPU_THREADS must be a positive integer");
  return static_cast<std::size_t>(t);
}

fpu::Dispersion parse_dispersion(const std::string& name) {
  if (name == "bare") return fpu::Dispersion::bare;
  if (name == "renormalized") return fpu::Dispersion::renormalized;
  throw fpu::parameter_error("--dispersion must be 'bare' or 'renormalized'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"beta-FPU chain simulator and spectral analysis toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fpu::kVersion);

  int exit_rc = 0;

  // Shared option storage; each verb registers the subset it uses.
  std::string config_path, out_dir, records_dir, dispersion_name = "bare";
  std::uint64_t seed = 0;
  double eta = 0.0, overlap = 0.5, omega_cut = 7.0;
  std::size_t segment = 16384, mode_k = 0;
  fpu::TrackThresholds th;
  std::string beta_csv;
  bool keep_records = false, no_field = false;
  double opt_beta = 0, opt_energy = 0, opt_dt = 0, opt_transient = 0, opt_record = 0;
  std::size_t opt_n = 0, opt_stride = 0;

  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file (key = value)");
    sub->add_option("--seed", seed, "override the master seed");
  };
  const auto add_records = [&](CLI::App* sub) {
    sub->add_option("--records", records_dir, "directory holding trajectory.bin / modes.bin")
        ->required();
  };
  const auto welch = [&] {
    fpu::WelchOptions o;
    o.segment = segment;
    o.overlap = overlap;
    return o;
  };

  auto* sim = app.add_subcommand("simulate", "integrate one chain and write record files");
  add_config(sim);
  sim->add_option("--out", out_dir, "output directory (default from config)");
  sim->add_option("--n", opt_n, "override: number of sites");
  sim->add_option("--beta", opt_beta, "override: quartic coupling");
  sim->add_option("--energy", opt_energy, "override: total energy");
  sim->add_option("--dt", opt_dt, "override: integrator step");
  sim->add_option("--t-transient", opt_transient, "override: discarded transient");
  sim->add_option("--t-record", opt_record, "override: recorded window");
  sim->add_option("--stride", opt_stride, "override: sampling stride in steps");
  sim->callback([&] {
    fpu::RunConfig cfg = base_config(config_path);
    if (sim->count("--seed")) cfg.seed = seed;
    if (sim->count("--out")) cfg.output_dir = out_dir;
    if (sim->count("--n")) cfg.n = opt_n;
    if (sim->count("--beta")) cfg.beta = opt_beta;
    if (sim->count("--energy")) cfg.target_energy = opt_energy;
    if (sim->count("--dt")) cfg.dt = opt_dt;
    if (sim->count("--t-transient")) cfg.t_transient = opt_transient;
    if (sim->count("--t-record")) cfg.t_record = opt_record;
    if (sim->count("--stride")) cfg.sample_stride = opt_stride;
    const fpu::SimulationResult res = fpu::run_simulation(cfg, &std::cerr);
    std::cout << "wrote " << res.dir << ": drift " << res.manifest.h_drift_relative
              << ", equipartition " << res.manifest.equipartition << ", eta_analytic "
              << res.manifest.eta_analytic
              << (res.manifest.thermalized ? "" : "  [warning: not thermalized]") << "\n";
  });

  auto* spec = app.add_subcommand("spectrum", "time-averaged mode power spectrum");
  add_records(spec);
  spec->add_option("--out", out_dir, "output directory (default: the records directory)");
  spec->add_option("--dispersion", dispersion_name, "abscissa: bare or renormalized");
  spec->add_option("--eta", eta, "renormalization factor for the abscissa");
  spec->callback([&] {
    std::optional<double> eta_opt;
    if (spec->count("--eta")) eta_opt = eta;
    const std::string dest = out_dir.empty() ? records_dir : out_dir;
    const fpu::PowerSpectrum ps =
        fpu::run_spectrum(records_dir, dest, parse_dispersion(dispersion_name), eta_opt);
    std::cout << "spectrum over " << ps.n_samples << " samples: T_fit " << ps.temperature_fit
              << ", slope " << ps.slope_fit << " -> " << dest << "/spectrum.csv\n";
  });

  auto* disp = app.add_subcommand("dispersion", "Welch spectrogram and measured dispersion");
  add_records(disp);
  disp->add_option("--out", out_dir, "output directory (default: the records directory)");
  disp->add_option("--segment", segment, "Welch segment length in samples");
  disp->add_option("--overlap", overlap, "Welch segment overlap fraction");
  disp->callback([&] {
    const std::string dest = out_dir.empty() ? records_dir : out_dir;
    const fpu::DispersionResult d = fpu::run_dispersion(records_dir, dest, welch());
    std::cout << "eta_measured " << d.measured.eta_fit << " (half-band " << d.measured.eta_halfband
              << "), eta_analytic " << d.analytic.eta_analytic << " at beta " << d.beta << "\n";
  });

  auto* rat = app.add_subcommand("ratios", "quartic/quadratic energy ratios");
  add_records(rat);
  rat->add_option("--out", out_dir, "output directory (default: the records directory)");
  rat->add_option("--eta", eta, "renormalization factor (default: measured from the record)");
  rat->add_option("--segment", segment, "Welch segment length for the eta measurement");
  rat->add_option("--overlap", overlap, "Welch overlap for the eta measurement");
  rat->callback([&] {
    std::optional<double> eta_opt;
    if (rat->count("--eta")) eta_opt = eta;
    const std::string dest = out_dir.empty() ? records_dir : out_dir;
    const fpu::RatiosResult r = fpu::run_ratios(records_dir, dest, eta_opt, welch());
    std::cout << "beta " << r.row.beta << ": H4/H2 " << r.row.h4_h2 << ", renormalized "
              << r.row.h4t_h2t << " (eta " << r.eta_used << ")\n";
  });

  auto* modes = app.add_subcommand("modes", "amplitude and demodulated phase of one mode");
  add_records(modes);
  modes->add_option("--k", mode_k, "mode index, 1..N-1")->required();
  modes->add_option("--out", out_dir, "output CSV path");
  modes->add_option("--dispersion", dispersion_name, "demodulation frequency: bare or renormalized");
  modes->add_option("--eta", eta, "renormalization factor (default: measured from the record)");
  modes->add_option("--segment", segment, "Welch segment length for the eta measurement");
  modes->add_option("--overlap", overlap, "Welch overlap for the eta measurement");
  modes->callback([&] {
    std::optional<double> eta_opt;
    if (modes->count("--eta")) eta_opt = eta;
    const std::string dest = out_dir.empty()
                                 ? records_dir + "/mode_k" + std::to_string(mode_k) + ".csv"
                                 : out_dir;
    const fpu::ModeEvolution ev = fpu::run_modes(records_dir, dest, mode_k,
                                                 parse_dispersion(dispersion_name), eta_opt,
                                                 welch());
    std::cout << "mode " << mode_k << ": " << ev.t.size() << " samples demodulated at omega "
              << ev.omega_demod << " -> " << dest << "\n";
  });

  auto* br = app.add_subcommand("breathers", "high-pass filter and localized-excitation tracks");
  add_records(br);
  br->add_option("--out", out_dir, "output directory (default: the records directory)");
  br->add_option("--omega-cut", omega_cut, "high-pass cutoff frequency");
  br->add_option("--median-factor", th.median_factor, "hot-site threshold over the spatial median");
  br->add_option("--floor-frac", th.floor_frac, "absolute hot-site floor as a fraction of source power");
  br->add_option("--min-consecutive", th.min_consecutive,
                 "minimum samples for a valid run/track (0 = one cut period)");
  br->add_option("--max-hop", th.max_hop, "max center drift in sites per linked sample");
  br->add_option("--max-gap", th.max_gap,
                 "max missing samples inside one track (0 = one cut period)");
  br->add_option("--span-level", th.span_level, "span counts sites above this fraction of peak");
  br->add_option("--smooth", th.smooth_samples,
                 "envelope window in samples (0 = one cut period, 1 = raw)");
  br->add_flag("--no-field", no_field, "skip writing the filtered field qf.bin");
  br->callback([&] {
    const std::string dest = out_dir.empty() ? records_dir : out_dir;
    const fpu::BreatherRun b =
        fpu::run_breathers(records_dir, dest, fpu::FilterSpec{omega_cut}, th, !no_field);
    std::cout << b.tracks.size() << " tracks, " << b.stats.count_per_site_time
              << " per site per time unit -> " << dest << "/breathers.csv\n";
  });

  auto* sweep = app.add_subcommand("sweep", "simulate + dispersion + ratios across beta values");
  add_config(sweep);
  sweep->add_option("--out", out_dir, "output root directory")->required();
  sweep->add_option("--betas", beta_csv, "comma-separated beta values (default 1,2,...,128)");
  sweep->add_flag("--keep-records", keep_records, "keep per-run .bin record files");
  sweep->add_option("--segment", segment, "Welch segment length in samples");
  sweep->add_option("--overlap", overlap, "Welch segment overlap fraction");
  sweep->callback([&] {
    fpu::RunConfig cfg = base_config(config_path);
    if (sweep->count("--seed")) cfg.seed = seed;
    const std::vector<double> betas =
        beta_csv.empty() ? fpu::default_sweep_betas() : parse_beta_list(beta_csv);
    const fpu::SweepResult res =
        fpu::run_sweep(cfg, betas, out_dir, keep_records, sweep_threads(), welch(), &std::cerr);
    for (std::size_t i = 0; i < res.eta_rows.size(); ++i) {
      const auto& e = res.eta_rows[i];
      std::cout << "beta " << e.beta << ": eta " << e.eta_measured << " (analytic "
                << e.eta_analytic << "), H4/H2 " << res.ratio_rows[i].h4_h2
                << ", renormalized " << res.ratio_rows[i].h4t_h2t << "\n";
    }
    if (res.scaling_fitted)
      std::cout << "eta ~ beta^" << res.scaling.exponent << " (r^2 " << res.scaling.r_squared
                << ")\n";
  });

  auto* ver = app.add_subcommand("verify", "run the numerical self-checks");
  add_config(ver);
  ver->callback([&] {
    fpu::RunConfig cfg = base_config(config_path);
    if (ver->count("--seed")) cfg.seed = seed;
    cfg.validate();
    const std::vector<fpu::CheckResult> results = fpu::run_selfchecks(cfg, &std::cout);
    std::size_t failed = 0;
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    std::cout << (failed == 0 ? "all checks passed" : "checks FAILED") << " (" << results.size()
              << " run, " << failed << " failed)\n";
    if (failed != 0) exit_rc = 3;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const fpu::parameter_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fpu::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const fpu::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_rc;
}
