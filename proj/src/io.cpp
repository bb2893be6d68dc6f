#include "twloc/io.hpp"

#include <fmt/format.h>
#include <numbers>

#include <array>
#include <bit>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "twloc/error.hpp"

namespace twloc::io {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

constexpr std::string_view kBinaryMagic = "# twloc-waveform";
constexpr std::string_view kIniName = "measurement.ini";

std::string num(double v) { return fmt::format("{:.17g}", v); }

double parse_double(std::string_view text, std::string_view what) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::Io, fmt::format("cannot parse {} from '{}'", what, text));
  }
  return v;
}

// Parses "key=value" tokens separated by whitespace after a leading '#'.
std::map<std::string, std::string> header_fields(std::string_view line) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(line)};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    out[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return out;
}

const std::string& require_field(const std::map<std::string, std::string>& fields, const std::string& key,
                                 const fs::path& path) {
  const auto it = fields.find(key);
  if (it == fields.end()) {
    throw Error(ErrorCode::Io, fmt::format("{}: header is missing '{}'", path.string(), key));
  }
  return it->second;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

void check_written(std::ostream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

void put_le(char* dst, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    dst[i] = static_cast<char>(bits & 0xffU);
    bits >>= 8;
  }
}

double get_le(const char* src) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(src[i]);
  return std::bit_cast<double>(bits);
}

LoadedWaveform read_binary(std::ifstream& in, const std::string& header, const fs::path& path) {
  const auto fields = header_fields(header.substr(kBinaryMagic.size()));
  const double fs_hz = parse_double(require_field(fields, "sample_rate", path), "sample_rate");
  const double t0 = parse_double(require_field(fields, "t0", path), "t0");
  const double count = parse_double(require_field(fields, "samples", path), "samples");
  if (!(count >= 1.0) || count != std::floor(count)) {
    throw Error(ErrorCode::Io, path.string() + ": invalid sample count");
  }
  const auto n = static_cast<std::size_t>(count);
  std::vector<char> raw(n * 8);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw Error(ErrorCode::Io, path.string() + ": truncated sample data");
  }
  std::vector<double> samples(n);
  for (std::size_t k = 0; k < n; ++k) samples[k] = get_le(raw.data() + 8 * k);
  const auto dev = fields.find("device");
  return {Waveform(std::move(samples), fs_hz, t0), dev == fields.end() ? std::string() : dev->second};
}

LoadedWaveform read_csv(std::ifstream& in, const std::string& header, const fs::path& path) {
  const auto fields = header_fields(header.substr(1));
  const double fs_hz = parse_double(require_field(fields, "sample_rate", path), "sample_rate");
  const double t0 = parse_double(require_field(fields, "t0", path), "t0");

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Io, path.string() + ": missing column header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::size_t columns = 0;
  if (line == "time_s,value") {
    columns = 1;
  } else if (line == "time_s,a,b,c") {
    columns = 3;
  } else {
    throw Error(ErrorCode::Io, path.string() + ": expected 'time_s,value' or 'time_s,a,b,c', got '" + line + "'");
  }

  std::array<std::vector<double>, 3> cols;
  std::size_t row = 2;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::string_view rest(line);
    const auto first = rest.find(',');
    if (first == std::string_view::npos) throw Error(ErrorCode::Io, fmt::format("{}:{}: malformed row", path.string(), row));
    rest.remove_prefix(first + 1);
    for (std::size_t c = 0; c < columns; ++c) {
      const auto comma = rest.find(',');
      const bool last = c + 1 == columns;
      if (last != (comma == std::string_view::npos)) {
        throw Error(ErrorCode::Io, fmt::format("{}:{}: wrong number of columns", path.string(), row));
      }
      cols[c].push_back(parse_double(rest.substr(0, comma), "sample"));
      if (!last) rest.remove_prefix(comma + 1);
    }
  }
  if (cols[0].empty()) throw Error(ErrorCode::Io, path.string() + ": no samples");

  const auto dev = fields.find("device");
  std::string device = dev == fields.end() ? std::string() : dev->second;
  if (columns == 1) return {Waveform(std::move(cols[0]), fs_hz, t0), device};
  return {zero_mode(Waveform(std::move(cols[0]), fs_hz, t0), Waveform(std::move(cols[1]), fs_hz, t0),
                    Waveform(std::move(cols[2]), fs_hz, t0)),
          device};
}

}  // namespace

WaveformFormat format_from_string(std::string_view name) {
  if (name == "binary" || name == "bin") return WaveformFormat::Binary;
  if (name == "csv") return WaveformFormat::Csv;
  throw Error::validation("format", "expected 'binary' or 'csv', got '" + std::string(name) + "'");
}

std::string_view to_string(WaveformFormat format) { return format == WaveformFormat::Binary ? "binary" : "csv"; }

std::string_view extension(WaveformFormat format) { return format == WaveformFormat::Binary ? ".bin" : ".csv"; }

void write_waveform_binary(const fs::path& path, const Waveform& w, std::string_view device) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << kBinaryMagic << " sample_rate=" << num(w.sample_rate()) << " t0=" << num(w.t0()) << " device=" << device
      << " samples=" << w.size() << '\n';
  std::vector<char> raw(w.size() * 8);
  for (std::size_t k = 0; k < w.size(); ++k) put_le(raw.data() + 8 * k, w[k]);
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  check_written(out, path);
}

void write_waveform_csv(const fs::path& path, const Waveform& w, std::string_view device) {
  auto out = open_out(path);
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "# sample_rate={:.17g} t0={:.17g} device={}\ntime_s,value\n", w.sample_rate(),
                 w.t0(), device);
  for (std::size_t k = 0; k < w.size(); ++k) {
    fmt::format_to(std::back_inserter(buf), "{:.17g},{:.17g}\n", w.time_at(static_cast<double>(k)), w[k]);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_written(out, path);
}

void write_three_phase_csv(const fs::path& path, const Waveform& mode0, std::string_view device) {
  auto out = open_out(path);
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "# sample_rate={:.17g} t0={:.17g} device={}\ntime_s,a,b,c\n",
                 mode0.sample_rate(), mode0.t0(), device);
  for (std::size_t k = 0; k < mode0.size(); ++k) {
    const ThreePhaseFrame p = clarke_inverse({mode0[k], 0.0, 0.0});
    fmt::format_to(std::back_inserter(buf), "{:.17g},{:.17g},{:.17g},{:.17g}\n", mode0.time_at(static_cast<double>(k)),
                   p.a, p.b, p.c);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_written(out, path);
}

LoadedWaveform read_waveform(const fs::path& path) {
  std::ifstream in(path, std::ios::in | std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorCode::Io, path.string() + ": empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  try {
    if (header.starts_with(kBinaryMagic)) return read_binary(in, header, path);
    if (header.starts_with("#")) return read_csv(in, header, path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(ErrorCode::Io, path.string() + ": " + e.what());
  }
  throw Error(ErrorCode::Io, path.string() + ": not a waveform file (missing '#' header)");
}

void write_measurement_set(const fs::path& dir, const MeasurementSet& ms, const WriteOptions& options) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create directory '" + dir.string() + "': " + ec.message());

  pt::ptree ini;
  ini.put("measurement.a_over_l", num(ms.a_over_l));
  if (ms.line_length_m) ini.put("measurement.line_length_m", num(*ms.line_length_m));
  for (int i = 0; i < 3; ++i) {
    const std::string name = device_names[i];
    std::string file;
    if (options.three_phase) {
      file = name + ".csv";
      write_three_phase_csv(dir / file, ms.waveforms[i], name);
    } else if (options.format == WaveformFormat::Csv) {
      file = name + ".csv";
      write_waveform_csv(dir / file, ms.waveforms[i], name);
    } else {
      file = name + ".bin";
      write_waveform_binary(dir / file, ms.waveforms[i], name);
    }
    ini.put("measurement." + name, file);
  }
  if (ms.truth) {
    ini.put("truth.x_over_l", num(ms.truth->x_over_l));
    ini.put("truth.v_inf", num(ms.truth->model.v_inf));
    ini.put("truth.k_alpha_sqrt", num(ms.truth->model.k_alpha_sqrt));
    ini.put("truth.k_alpha_lin", num(ms.truth->model.k_alpha_lin));
    ini.put("truth.k_disp", num(ms.truth->model.k_disp));
  }
  const fs::path ini_path = dir / kIniName;
  try {
    pt::write_ini(ini_path.string(), ini);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::Io, std::string("cannot write '") + ini_path.string() + "': " + e.message());
  }
}

MeasurementSet read_measurement_set(const fs::path& dir) {
  const fs::path ini_path = dir / kIniName;
  if (!fs::is_regular_file(ini_path)) {
    throw Error(ErrorCode::Io, "'" + dir.string() + "' has no " + std::string(kIniName));
  }
  pt::ptree ini;
  try {
    pt::read_ini(ini_path.string(), ini);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::Io, "cannot read '" + ini_path.string() + "': " + e.message());
  }
  auto get = [&](const std::string& key) -> std::optional<double> {
    const auto v = ini.get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return parse_double(*v, key);
  };

  const auto a = get("measurement.a_over_l");
  if (!a) throw Error(ErrorCode::Io, ini_path.string() + ": missing measurement.a_over_l");

  std::vector<Waveform> loaded;
  for (const char* name : device_names) {
    const auto file = ini.get_optional<std::string>(std::string("measurement.") + name);
    if (!file) throw Error(ErrorCode::Io, ini_path.string() + ": missing measurement." + name);
    loaded.push_back(read_waveform(dir / *file).waveform);
  }
  MeasurementSet ms{{std::move(loaded[0]), std::move(loaded[1]), std::move(loaded[2])}, *a, get("measurement.line_length_m"),
                    std::nullopt};
  if (const auto x = get("truth.x_over_l")) {
    PropagationModel m;
    m.v_inf = get("truth.v_inf").value_or(m.v_inf);
    m.k_alpha_sqrt = get("truth.k_alpha_sqrt").value_or(0.0);
    m.k_alpha_lin = get("truth.k_alpha_lin").value_or(0.0);
    m.k_disp = get("truth.k_disp").value_or(0.0);
    ms.truth = ScenarioTruth{*x, m};
  }
  return ms;
}

std::string_view report_csv_header() {
  return "kind,f_hz,x_over_l,x_raw,valid,outlier,t_m1,t_m2,t_m3,amp_m1,amp_m2,amp_m3,alpha_l,beta_l,beta_prime_l,"
         "sigma,n_valid,n_outliers,side";
}

void write_report_csv(std::ostream& out, const LocalizationReport& r) {
  out << report_csv_header() << '\n';
  for (std::size_t i = 0; i < r.frequencies.size(); ++i) {
    const LocationPoint& p = r.per_frequency[i];
    const CharacteristicPoint& c = r.characteristic.points[i];
    out << fmt::format("freq,{:.17g},{:.17g},{:.17g},{:d},{:d}", r.frequencies[i], p.x_over_l, p.raw, p.valid ? 1 : 0,
                       r.outlier[i] ? 1 : 0);
    for (const auto& f : r.features) out << ',' << num(f[i].t_max);
    for (const auto& f : r.features) out << ',' << num(f[i].amplitude);
    out << fmt::format(",{:.17g},{:.17g},{:.17g},,,,\n", c.alpha_l, c.beta_l, c.beta_prime_l);
  }
  out << fmt::format("aggregate,,{:.17g},,,,,,,,,,,,,{:.17g},{},{},{}\n", r.x_over_l, r.sigma, r.n_valid, r.n_outliers,
                     to_string(r.side));
}

void write_report_csv(const fs::path& path, const LocalizationReport& report) {
  auto out = open_out(path);
  write_report_csv(out, report);
  check_written(out, path);
}

std::string_view characteristic_csv_header() { return "f_hz,valid,alpha_l,beta_l,beta_prime_l,group_delay_s"; }

void write_characteristic_csv(std::ostream& out, const LocalizationReport& r) {
  out << characteristic_csv_header() << '\n';
  for (const CharacteristicPoint& c : r.characteristic.points) {
    out << fmt::format("{:.17g},{:d},{:.17g},{:.17g},{:.17g},{:.17g}\n", c.f_hz, c.valid ? 1 : 0, c.alpha_l, c.beta_l,
                       c.beta_prime_l, c.beta_prime_l / (2.0 * std::numbers::pi));
  }
}

std::string summary_line(const LocalizationReport& r) {
  std::string s = fmt::format("x/l = {:.4f} ± {:.4f} (n_valid={}, outliers={}, side={})", r.x_over_l, r.sigma, r.n_valid,
                              r.n_outliers, to_string(r.side));
  if (r.line_length_m) {
    s += fmt::format("  x = {:.1f} m ± {:.1f} m", r.x_over_l * *r.line_length_m, r.sigma * *r.line_length_m);
  }
  return s;
}

void write_scalogram_csv(const fs::path& path, const Scalogram& sg) {
  auto out = open_out(path);
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "time_s");
  for (double f : sg.grid().frequencies) fmt::format_to(std::back_inserter(buf), ",{:.17g}", f);
  buf.push_back('\n');
  for (std::size_t k = 0; k < sg.cols(); ++k) {
    fmt::format_to(std::back_inserter(buf), "{:.17g}", sg.t0() + static_cast<double>(k) / sg.sample_rate());
    for (std::size_t i = 0; i < sg.rows(); ++i) {
      fmt::format_to(std::back_inserter(buf), ",{:.9g}", std::abs(sg.row(i)[k]));
    }
    buf.push_back('\n');
    if (buf.size() > (1U << 20)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check_written(out, path);
}

void ensure_writable(const fs::path& path) {
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) {
    throw Error(ErrorCode::Io, "output directory '" + parent.string() + "' does not exist");
  }
  std::ofstream probe(path, std::ios::out | std::ios::app);
  if (!probe) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
}

}  // namespace twloc::io
