#pragma once

// Binary record streams, CSV emitters, and content checksums.
//
// Binary framing, little-endian throughout; common 36-byte header
//   magic[4] | n u64 | beta f64 | dt f64 | sample_stride u64
// followed by fixed-size per-sample records:
//   "FPU1" trajectory:  t f64, q[0..n) f64, p[0..n) f64
//   "FPUM" mode record: t f64, (Re Q_k, Im Q_k) for k = 0..n/2,
//                              (Re P_k, Im P_k) for k = 0..n/2
//   "FPUF" filtered:    t f64, qf[0..n) f64
// Mode files keep only the nonredundant half spectrum; readers rebuild the
// Hermitian mirror Q_{N-k} = Q_k* exactly, so a round trip is bit exact.
// Sample counts are derived from the file size, which must land on a
// record boundary; anything else is reported as truncation.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "fpu/analysis.hpp"
#include "fpu/breather.hpp"

namespace fpu {

namespace detail {

constexpr std::size_t kHeaderBytes = 4 + 8 + 8 + 8 + 8;

inline void put_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_f64(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

struct HeaderFields {
  std::size_t n = 0;
  double beta = 0.0;
  double dt = 0.0;
  std::size_t stride = 0;
};

inline void write_header(std::ofstream& out, const char magic[4], const HeaderFields& h) {
  out.write(magic, 4);
  put_u64(out, h.n);
  put_f64(out, h.beta);
  put_f64(out, h.dt);
  put_u64(out, h.stride);
}

inline HeaderFields read_header(std::ifstream& in, const char* expect_magic,
                                const std::string& path) {
  char magic[4] = {};
  std::uint64_t n = 0, stride = 0;
  double beta = 0, dt = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&beta), 8);
  in.read(reinterpret_cast<char*>(&dt), 8);
  in.read(reinterpret_cast<char*>(&stride), 8);
  if (!in) throw io_error("cannot read record header: " + path);
  if (std::memcmp(magic, expect_magic, 4) != 0)
    throw io_error("bad magic in " + path + " (expected " + expect_magic + ")");
  if (n < 4 || n > (1u << 24) || stride == 0 || !(dt > 0.0) || !(beta >= 0.0))
    throw io_error("implausible header fields in " + path);
  return {static_cast<std::size_t>(n), beta, dt, static_cast<std::size_t>(stride)};
}

inline std::size_t sample_count(const std::string& path, std::size_t record_bytes) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) throw io_error("cannot stat " + path);
  if (bytes < kHeaderBytes || (bytes - kHeaderBytes) % record_bytes != 0)
    throw io_error("truncated record file: " + path);
  return static_cast<std::size_t>((bytes - kHeaderBytes) / record_bytes);
}

class RecordWriterBase {
 public:
  RecordWriterBase(const std::string& path, const char magic[4], const HeaderFields& h)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw io_error("cannot open for writing: " + path);
    write_header(out_, magic, h);
    if (!out_) throw io_error("cannot write header: " + path);
  }

  void close() {
    if (!out_.is_open()) return;
    out_.flush();
    const bool ok = static_cast<bool>(out_);
    out_.close();
    if (!ok) throw io_error("write failure on " + path_);
  }

  std::size_t n_written() const { return n_written_; }
  const std::string& path() const { return path_; }

 protected:
  ~RecordWriterBase() {
    if (out_.is_open()) out_.close();
  }
  void put_row(std::span<const double> row) {
    out_.write(reinterpret_cast<const char*>(row.data()),
               static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!out_) throw io_error("write failure on " + path_);
    ++n_written_;
  }

  std::string path_;
  std::ofstream out_;
  std::size_t n_written_ = 0;
};

class RecordReaderBase {
 public:
  RecordReaderBase(const std::string& path, const char* magic)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw io_error("cannot open for reading: " + path);
    h_ = read_header(in_, magic, path);
  }

  std::size_t n() const { return h_.n; }
  double beta() const { return h_.beta; }
  double dt() const { return h_.dt; }
  std::size_t stride() const { return h_.stride; }
  double dt_sample() const { return h_.dt * static_cast<double>(h_.stride); }
  std::size_t n_samples() const { return n_samples_; }
  const std::string& path() const { return path_; }

  void reset() {
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(kHeaderBytes));
    if (!in_) throw io_error("seek failure on " + path_);
  }

 protected:
  void finish_init(std::size_t doubles_per_sample) {
    row_.resize(doubles_per_sample);
    n_samples_ = sample_count(path_, doubles_per_sample * sizeof(double));
  }
  // Returns false on clean end-of-file, throws on a ragged tail.
  bool fetch_row() {
    in_.read(reinterpret_cast<char*>(row_.data()),
             static_cast<std::streamsize>(row_.size() * sizeof(double)));
    if (in_.gcount() == 0 && in_.eof()) return false;
    if (!in_) throw io_error("truncated record file: " + path_);
    return true;
  }

  std::string path_;
  std::ifstream in_;
  HeaderFields h_;
  std::vector<double> row_;
  std::size_t n_samples_ = 0;
};

}  // namespace detail

class TrajectoryWriter : public detail::RecordWriterBase {
 public:
  TrajectoryWriter(const std::string& path, std::size_t n, double beta, double dt,
                   std::size_t stride)
      : RecordWriterBase(path, "FPU1", {n, beta, dt, stride}), n_(n), row_(1 + 2 * n) {}

  void write(const ChainState& s) {
    if (s.q.size() != n_ || s.p.size() != n_)
      throw invalid_state_error("TrajectoryWriter: state size mismatch");
    row_[0] = s.t;
    std::copy(s.q.begin(), s.q.end(), row_.begin() + 1);
    std::copy(s.p.begin(), s.p.end(), row_.begin() + 1 + static_cast<std::ptrdiff_t>(n_));
    put_row(row_);
  }

 private:
  std::size_t n_;
  std::vector<double> row_;
};

class TrajectoryReader : public detail::RecordReaderBase {
 public:
  explicit TrajectoryReader(const std::string& path) : RecordReaderBase(path, "FPU1") {
    finish_init(1 + 2 * n());
  }

  bool next(ChainState& s) {
    if (!fetch_row()) return false;
    const std::size_t m = n();
    s.t = row_[0];
    s.q.assign(row_.begin() + 1, row_.begin() + 1 + static_cast<std::ptrdiff_t>(m));
    s.p.assign(row_.begin() + 1 + static_cast<std::ptrdiff_t>(m), row_.end());
    return true;
  }
};

class ModeWriter : public detail::RecordWriterBase {
 public:
  ModeWriter(const std::string& path, std::size_t n, double beta, double dt, std::size_t stride)
      : RecordWriterBase(path, "FPUM", {n, beta, dt, stride}), n_(n),
        row_(1 + 4 * (n / 2 + 1)) {}

  void write(const ModeState& m) {
    if (m.Q.size() != n_ || m.P.size() != n_)
      throw invalid_modes_error("ModeWriter: mode state size mismatch");
    row_[0] = m.t;
    const std::size_t half = n_ / 2;
    std::size_t i = 1;
    for (std::size_t k = 0; k <= half; ++k) {
      row_[i++] = m.Q[k].real();
      row_[i++] = m.Q[k].imag();
    }
    for (std::size_t k = 0; k <= half; ++k) {
      row_[i++] = m.P[k].real();
      row_[i++] = m.P[k].imag();
    }
    put_row(row_);
  }

 private:
  std::size_t n_;
  std::vector<double> row_;
};

class ModeReader : public detail::RecordReaderBase {
 public:
  explicit ModeReader(const std::string& path) : RecordReaderBase(path, "FPUM") {
    finish_init(1 + 4 * (n() / 2 + 1));
  }

  bool next(ModeState& m) {
    if (!fetch_row()) return false;
    const std::size_t sz = n(), half = sz / 2;
    m.t = row_[0];
    m.Q.resize(sz);
    m.P.resize(sz);
    std::size_t i = 1;
    for (std::size_t k = 0; k <= half; ++k) {
      m.Q[k] = {row_[i], row_[i + 1]};
      i += 2;
    }
    for (std::size_t k = 0; k <= half; ++k) {
      m.P[k] = {row_[i], row_[i + 1]};
      i += 2;
    }
    for (std::size_t k = half + 1; k < sz; ++k) {
      m.Q[k] = std::conj(m.Q[sz - k]);
      m.P[k] = std::conj(m.P[sz - k]);
    }
    return true;
  }
};

class FieldWriter : public detail::RecordWriterBase {
 public:
  FieldWriter(const std::string& path, std::size_t n, double beta, double dt, std::size_t stride)
      : RecordWriterBase(path, "FPUF", {n, beta, dt, stride}), n_(n), row_(1 + n) {}

  void write(double t, std::span<const double> qf) {
    if (qf.size() != n_) throw parameter_error("FieldWriter: field size mismatch");
    row_[0] = t;
    std::copy(qf.begin(), qf.end(), row_.begin() + 1);
    put_row(row_);
  }

  void write_field(const FilteredField& f) {
    if (f.n_sites != n_) throw parameter_error("FieldWriter: field size mismatch");
    std::vector<double> col(n_);
    for (std::size_t i = 0; i < f.n_samples; ++i) {
      for (std::size_t s = 0; s < n_; ++s) col[s] = f.at(s, i);
      write(f.time_at(i), col);
    }
  }

 private:
  std::size_t n_;
  std::vector<double> row_;
};

class FieldReader : public detail::RecordReaderBase {
 public:
  explicit FieldReader(const std::string& path) : RecordReaderBase(path, "FPUF") {
    finish_init(1 + n());
  }

  bool next(double& t, std::vector<double>& qf) {
    if (!fetch_row()) return false;
    t = row_[0];
    qf.assign(row_.begin() + 1, row_.end());
    return true;
  }
};

// ---------------------------------------------------------------------------
// CSV emitters. '.' decimal point, LF line endings, %.12g values; column
// orders are part of the external contract and never change.

namespace detail {

class CsvFile {
 public:
  CsvFile(const std::string& path, const char* header) : path_(path), out_(path, std::ios::trunc) {
    if (!out_) throw io_error("cannot open for writing: " + path);
    out_ << header << "\n";
  }
  void row(std::initializer_list<double> values) {
    char buf[32];
    bool first = true;
    for (double v : values) {
      std::snprintf(buf, sizeof buf, "%.12g", v);
      if (!first) out_ << ",";
      out_ << buf;
      first = false;
    }
    out_ << "\n";
  }
  void raw(const std::string& line) { out_ << line << "\n"; }
  void close() {
    out_.flush();
    if (!out_) throw io_error("write failure on " + path_);
    out_.close();
  }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace detail

inline void write_spectrum_csv(const std::string& path, const PowerSpectrum& ps) {
  detail::CsvFile csv(path, "k,omega,mean_sq_a,T_fit,slope");
  for (std::size_t k = 1; k < ps.mean_sq_a.size(); ++k)
    csv.row({static_cast<double>(k), ps.omega[k], ps.mean_sq_a[k], ps.temperature_fit,
             ps.slope_fit});
  csv.close();
}

inline void write_spectrogram_csv(const std::string& path, const SpectrogramResult& sg) {
  detail::CsvFile csv(path, "k,omega_bin,power");
  for (std::size_t k = 1; k < sg.n; ++k)
    for (std::size_t j = 0; j < sg.omega_bins.size(); ++j)
      csv.row({static_cast<double>(k), sg.omega_bins[j], sg.power_at(k, j)});
  csv.close();
}

inline void write_peaks_csv(const std::string& path, const SpectrogramResult& sg) {
  detail::CsvFile csv(path, "k,omega_bare,peak_omega,width");
  for (std::size_t k = 1; k < sg.n; ++k)
    csv.row({static_cast<double>(k), bare_dispersion(sg.n, k), sg.peak_omega[k], sg.width[k]});
  csv.close();
}

struct EtaRow {
  double beta = 0.0;
  double eta_measured = 1.0;
  double eta_analytic = 1.0;
};

inline void write_eta_csv(const std::string& path, std::span<const EtaRow> rows) {
  detail::CsvFile csv(path, "beta,eta_measured,eta_analytic");
  for (const auto& r : rows) csv.row({r.beta, r.eta_measured, r.eta_analytic});
  csv.close();
}

struct RatioRow {
  double beta = 0.0;
  double h4_h2 = 0.0;
  double h4t_h2t = 0.0;
};

inline void write_ratios_csv(const std::string& path, std::span<const RatioRow> rows) {
  detail::CsvFile csv(path, "beta,h4_h2,h4t_h2t");
  for (const auto& r : rows) csv.row({r.beta, r.h4_h2, r.h4t_h2t});
  csv.close();
}

inline void write_breathers_csv(const std::string& path, std::span<const BreatherTrack> tracks) {
  detail::CsvFile csv(path, "track_id,t_start,t_end,mean_site,max_span,oscillation_count,peak_energy");
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& t = tracks[i];
    csv.row({static_cast<double>(i), t.t_start, t.t_end, t.mean_site,
             static_cast<double>(t.max_span), t.oscillation_count, t.peak_energy});
  }
  csv.close();
}

inline void write_mode_evolution_csv(const std::string& path, const ModeEvolution& ev) {
  detail::CsvFile csv(path, "t,amplitude,phase");
  for (std::size_t i = 0; i < ev.t.size(); ++i) csv.row({ev.t[i], ev.amplitude[i], ev.phase[i]});
  csv.close();
}

inline void write_state_csv(const std::string& path, const ChainState& s,
                            const SiteEnergyField& e) {
  if (e.e.size() != s.q.size()) throw parameter_error("write_state_csv: field size mismatch");
  detail::CsvFile csv(path, "site,q,p,e");
  for (std::size_t i = 0; i < s.q.size(); ++i)
    csv.row({static_cast<double>(i), s.q[i], s.p[i], e.e[i]});
  csv.close();
}

inline void write_modes_snapshot_csv(const std::string& path, const ModeState& m) {
  detail::CsvFile csv(path, "k,omega_k,re_Q,im_Q,re_P,im_P");
  const std::size_t n = m.Q.size();
  for (std::size_t k = 0; k < n; ++k)
    csv.row({static_cast<double>(k), k == 0 ? 0.0 : bare_dispersion(n, k), m.Q[k].real(),
             m.Q[k].imag(), m.P[k].real(), m.P[k].imag()});
  csv.close();
}

// ---------------------------------------------------------------------------
// FNV-1a 64-bit content checksums for the run manifest.

inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open for checksum: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<unsigned char> buf(1 << 16);
  while (in) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    for (std::size_t i = 0; i < got; ++i) {
      h ^= buf[i];
      h *= 0x100000001b3ULL;
    }
  }
  if (!in.eof()) throw io_error("read failure during checksum: " + path);
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace fpu
