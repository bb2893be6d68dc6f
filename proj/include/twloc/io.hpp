#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "twloc/cwt.hpp"
#include "twloc/locator.hpp"
#include "twloc/simkit.hpp"

namespace twloc::io {

enum class WaveformFormat { Binary, Csv };

WaveformFormat format_from_string(std::string_view name);
std::string_view to_string(WaveformFormat format);
std::string_view extension(WaveformFormat format);

// Binary layout: one text header line
//   "# twloc-waveform sample_rate=<Hz> t0=<s> device=<id> samples=<n>\n"
// followed by n little-endian IEEE-754 doubles. Header numbers use 17
// significant digits, so the round trip is lossless.
void write_waveform_binary(const std::filesystem::path& path, const Waveform& w, std::string_view device);

// CSV: "# sample_rate=<Hz> t0=<s> device=<id>", then "time_s,value" and one row per sample.
void write_waveform_csv(const std::filesystem::path& path, const Waveform& w, std::string_view device);

// Three-phase CSV ("time_s,a,b,c") carrying a pure zero-sequence frame.
void write_three_phase_csv(const std::filesystem::path& path, const Waveform& mode0, std::string_view device);

struct LoadedWaveform {
  Waveform waveform;
  std::string device;
};

// Detects binary vs CSV from the header; a three-phase CSV is reduced to its
// Clarke zero mode.
LoadedWaveform read_waveform(const std::filesystem::path& path);

struct WriteOptions {
  WaveformFormat format = WaveformFormat::Binary;
  bool three_phase = false;
};

// Directory layout: M1/M2/M3 waveform files plus measurement.ini with a/l,
// optional line length and, for simulated sets, the ground truth.
void write_measurement_set(const std::filesystem::path& dir, const MeasurementSet& ms, const WriteOptions& options = {});
MeasurementSet read_measurement_set(const std::filesystem::path& dir);

// Per-frequency rows followed by one aggregate row; columns in report_csv_header().
std::string_view report_csv_header();
void write_report_csv(std::ostream& out, const LocalizationReport& report);
void write_report_csv(const std::filesystem::path& path, const LocalizationReport& report);

std::string_view characteristic_csv_header();
void write_characteristic_csv(std::ostream& out, const LocalizationReport& report);

// "x/l = 0.3000 ± 0.0000 (n_valid=..., outliers=..., side=...)" plus meters when the length is known.
std::string summary_line(const LocalizationReport& report);

// Header row "time_s,<f1>,<f2>,...", then |W| per time sample.
void write_scalogram_csv(const std::filesystem::path& path, const Scalogram& sg);

// Fails with an I/O error if `path` cannot be created for writing; the file is left in place.
void ensure_writable(const std::filesystem::path& path);

}  // namespace twloc::io
