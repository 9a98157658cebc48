#pragma once

// Run configuration (flat key = value files) and the run manifest.
//
// The config format is deliberately primitive: one `key = value` per line,
// '#' starts a comment, unknown keys are rejected. Doubles are written with
// 17 significant digits so a save/load cycle reproduces the exact values.

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <optional>

#include <json.hpp>

#include "fpu/io.hpp"

namespace fpu {

// Documented in every manifest so runs can be reproduced elsewhere.
inline constexpr const char* kSeedRule =
    "run_seed = splitmix64(master_seed + run_index * 0x9E3779B97F4A7C15)";

inline std::uint64_t derive_run_seed(std::uint64_t master_seed, std::uint64_t run_index) {
  std::uint64_t s = master_seed + run_index * 0x9E3779B97F4A7C15ULL;
  return splitmix64(s);
}

struct RunConfig {
  std::size_t n = 128;
  double beta = 1.0;
  double target_energy = 200.0;
  double dt = 0.01;
  double t_transient = 1e5;
  double t_record = 1e5;
  std::size_t sample_stride = 10;
  std::uint64_t seed = 12345;
  std::optional<double> omega_cut;
  std::string output_dir = "run";

  ChainParams chain() const { return {n, beta, target_energy}; }
  double dt_sample() const { return dt * static_cast<double>(sample_stride); }
  double nyquist() const { return kPi / dt_sample(); }

  void validate() const {
    chain().validate();
    if (!(dt > 0.0) || dt >= 0.1)
      throw parameter_error("config: dt must lie in (0, 0.1) to resolve the top of the band");
    if (!(t_transient >= 0.0)) throw parameter_error("config: t_transient must be >= 0");
    if (!(t_record > 0.0)) throw parameter_error("config: t_record must be > 0");
    if (sample_stride == 0) throw parameter_error("config: sample_stride must be >= 1");
    const double slowest_period = 2.0 * kPi / bare_dispersion(n, 1);
    if (t_record < 10.0 * slowest_period)
      throw parameter_error("config: t_record must cover >= 10 periods of the slowest mode (>= " +
                            std::to_string(10.0 * slowest_period) + ")");
    if (omega_cut) {
      if (!(*omega_cut > 0.0) || *omega_cut >= nyquist())
        throw parameter_error("config: omega_cut must lie in (0, pi/(dt*sample_stride))");
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    char buf[340];
    std::snprintf(buf, sizeof buf,
                  "# beta-FPU run configuration\n"
                  "n = %zu\n"
                  "beta = %.17g\n"
                  "target_energy = %.17g\n"
                  "dt = %.17g\n"
                  "t_transient = %.17g\n"
                  "t_record = %.17g\n"
                  "sample_stride = %zu\n"
                  "seed = %llu\n",
                  n, beta, target_energy, dt, t_transient, t_record, sample_stride,
                  static_cast<unsigned long long>(seed));
    out << buf;
    if (omega_cut) {
      std::snprintf(buf, sizeof buf, "omega_cut = %.17g\n", *omega_cut);
      out << buf;
    }
    out << "output_dir = " << output_dir << "\n";
    out.flush();
    if (!out) throw io_error("write failure on " + path);
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string{};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos)
        throw parameter_error(path + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      cfg.set(key, value, path + ":" + std::to_string(lineno));
    }
    return cfg;
  }

  // Applies one key = value pair; shared by the file loader and CLI overrides.
  void set(const std::string& key, const std::string& value, const std::string& where) {
    const auto bad = [&](const char* what) {
      throw parameter_error(where + ": " + what + " for key '" + key + "': '" + value + "'");
    };
    const auto as_double = [&] {
      char* end = nullptr;
      const double v = std::strtod(value.c_str(), &end);
      if (end == value.c_str() || *end != '\0') bad("malformed number");
      return v;
    };
    const auto as_uint = [&] {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
      if (end == value.c_str() || *end != '\0' || value.find('-') != std::string::npos)
        bad("malformed unsigned integer");
      return static_cast<std::uint64_t>(v);
    };
    if (key == "n")
      n = static_cast<std::size_t>(as_uint());
    else if (key == "beta")
      beta = as_double();
    else if (key == "target_energy")
      target_energy = as_double();
    else if (key == "dt")
      dt = as_double();
    else if (key == "t_transient")
      t_transient = as_double();
    else if (key == "t_record")
      t_record = as_double();
    else if (key == "sample_stride")
      sample_stride = static_cast<std::size_t>(as_uint());
    else if (key == "seed")
      seed = as_uint();
    else if (key == "omega_cut")
      omega_cut = as_double();
    else if (key == "output_dir")
      output_dir = value;
    else
      throw parameter_error(where + ": unknown config key '" + key + "'");
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"n", n},
                     {"beta", beta},
                     {"target_energy", target_energy},
                     {"dt", dt},
                     {"t_transient", t_transient},
                     {"t_record", t_record},
                     {"sample_stride", sample_stride},
                     {"seed", seed},
                     {"output_dir", output_dir}};
    if (omega_cut) j["omega_cut"] = *omega_cut;
    return j;
  }
};

inline std::string iso8601_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct ManifestFileEntry {
  std::string name;
  std::uint64_t bytes = 0;
  std::string fnv1a64;
};

// Wall-clock fields vary between runs by design; determinism claims apply
// to the data files the manifest describes, not to the manifest itself.
struct RunManifest {
  RunConfig config;
  std::string version = kVersion;
  std::string started_at;
  std::string finished_at;
  double wall_seconds = 0.0;
  std::vector<ManifestFileEntry> files;
  double h_drift_relative = 0.0;   // |linear-trend slope| x window / H: secular drift
  double h_dev_max_relative = 0.0; // max instantaneous |H - H_ref| / H_ref at sample points
  double equipartition = 0.0;
  bool thermalized = false;
  double eta_analytic = 1.0;

  void add_file(const std::string& dir, const std::string& name) {
    const std::string full = dir.empty() ? name : dir + "/" + name;
    std::error_code ec;
    const auto bytes = std::filesystem::file_size(full, ec);
    if (ec) throw io_error("cannot stat " + full);
    files.push_back({name, static_cast<std::uint64_t>(bytes), to_hex(fnv1a64_file(full))});
  }

  void save(const std::string& path) const {
    nlohmann::json j;
    j["config"] = config.to_json();
    j["version"] = version;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["wall_seconds"] = wall_seconds;
    j["seed_rule"] = kSeedRule;
    j["h_drift_relative"] = h_drift_relative;
    j["h_dev_max_relative"] = h_dev_max_relative;
    j["equipartition"] = equipartition;
    j["thermalized"] = thermalized;
    j["eta_analytic"] = eta_analytic;
    j["files"] = nlohmann::json::array();
    for (const auto& f : files)
      j["files"].push_back({{"name", f.name}, {"bytes", f.bytes}, {"fnv1a64", f.fnv1a64}});
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    out.flush();
    if (!out) throw io_error("write failure on " + path);
  }
};

inline nlohmann::json load_manifest_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed manifest " + path + ": " + e.what());
  }
  return j;
}

// Re-reads every file listed in a manifest and confirms its checksum.
inline bool manifest_checksums_valid(const std::string& manifest_path, const std::string& dir) {
  const nlohmann::json j = load_manifest_json(manifest_path);
  for (const auto& f : j.at("files")) {
    const std::string full = dir + "/" + f.at("name").get<std::string>();
    if (to_hex(fnv1a64_file(full)) != f.at("fnv1a64").get<std::string>()) return false;
  }
  return true;
}

}  // namespace fpu
