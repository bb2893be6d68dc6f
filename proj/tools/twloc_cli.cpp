// twloc command-line front end.
#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "twloc/config.hpp"
#include "twloc/error.hpp"
#include "twloc/experiment.hpp"
#include "twloc/io.hpp"
#include "twloc/locator.hpp"
#include "twloc/plot.hpp"

namespace fs = std::filesystem;
using namespace twloc;

namespace {

enum Exit { kOk = 0, kMethod = 1, kUsage = 2, kIo = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Io:
      return kIo;
    case ErrorCode::Parameter:
    case ErrorCode::Validation:
      return kUsage;
    default:
      return kMethod;
  }
}

struct AnalysisFlags {
  std::string config;
  std::optional<double> omega0, f_min, f_max;
  std::optional<int> voices;

  void attach(CLI::App* app) {
    app->add_option("--analysis", config, "INI file with an [analysis] section")->check(CLI::ExistingFile);
    app->add_option("--omega0", omega0, "Morlet center frequency (default 6)");
    app->add_option("--fmin", f_min, "lowest central frequency [Hz]");
    app->add_option("--fmax", f_max, "highest central frequency [Hz]");
    app->add_option("--voices", voices, "central frequencies per octave");
  }

  AnalysisParams params() const {
    AnalysisParams p = config.empty() ? AnalysisParams{} : config::load_analysis(config);
    if (omega0) p.cwt.omega0 = *omega0;
    if (f_min) p.f_min = *f_min;
    if (f_max) p.f_max = *f_max;
    if (voices) p.voices = *voices;
    p.validate();
    return p;
  }
};

struct InputFlags {
  std::vector<std::string> inputs;
  std::optional<double> a_over_l;
  std::optional<double> length_m;

  void attach(CLI::App* app) {
    app->add_option("inputs", inputs, "measurement directory, or the M1 M2 M3 waveform files")->required();
    app->add_option("--a-over-l", a_over_l, "relative position of M2 (required with three files)");
    app->add_option("--length", length_m, "observed line length [m], for reporting in meters");
  }

  MeasurementSet load() const {
    MeasurementSet ms = [&] {
      if (inputs.size() == 1) {
        if (!fs::is_directory(inputs[0])) {
          throw UsageError("a single input must be a measurement directory; pass the three device files otherwise");
        }
        return io::read_measurement_set(inputs[0]);
      }
      if (inputs.size() != 3) throw UsageError("expected one directory or exactly three waveform files");
      if (!a_over_l) throw UsageError("--a-over-l is required when passing waveform files");
      auto w1 = io::read_waveform(inputs[0]).waveform;
      auto w2 = io::read_waveform(inputs[1]).waveform;
      auto w3 = io::read_waveform(inputs[2]).waveform;
      return MeasurementSet{{std::move(w1), std::move(w2), std::move(w3)}, *a_over_l, std::nullopt, std::nullopt};
    }();
    if (a_over_l) ms.a_over_l = *a_over_l;
    if (length_m) ms.line_length_m = *length_m;
    return ms;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::out | std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

std::string report_csv(const LocalizationReport& r) {
  std::ostringstream s;
  io::write_report_csv(s, r);
  return s.str();
}

void print_truth(const MeasurementSet& ms, const LocalizationReport& r) {
  if (!ms.truth) return;
  std::cout << fmt::format("truth x/l = {:.6f}, relative error = {:.3e}\n", ms.truth->x_over_l,
                           relative_error(r.x_over_l, ms.truth->x_over_l, 1.0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-terminal traveling-wave event localization"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "synthesize M1/M2/M3 measurements from a scenario config");
  std::string sim_config;
  std::string sim_out;
  std::string sim_format = "binary";
  bool sim_three_phase = false;
  sim->add_option("config", sim_config, "scenario INI file")->required();
  sim->add_option("-o,--output", sim_out, "output directory")->required();
  sim->add_option("--format", sim_format, "binary or csv")->check(CLI::IsMember({"binary", "csv"}));
  sim->add_flag("--three-phase", sim_three_phase, "write phase a/b/c CSV files (zero-sequence content)");

  // locate / characterize
  auto* loc = app.add_subcommand("locate", "estimate the event location from three measurements");
  InputFlags loc_in;
  AnalysisFlags loc_an;
  std::string loc_out;
  std::string loc_dump;
  loc_in.attach(loc);
  loc_an.attach(loc);
  loc->add_option("-o,--output", loc_out, "report CSV path");
  loc->add_option("--dump-scalogram", loc_dump, "directory for per-device |W| CSV matrices");

  auto* chr = app.add_subcommand("characterize", "estimate alpha*l, beta*l and beta'*l of the line");
  InputFlags chr_in;
  AnalysisFlags chr_an;
  std::string chr_out;
  chr_in.attach(chr);
  chr_an.attach(chr);
  chr->add_option("-o,--output", chr_out, "characteristic CSV path");

  // baseline
  auto* base = app.add_subcommand("baseline", "classical double-terminal estimate next to the proposed method");
  InputFlags base_in;
  AnalysisFlags base_an;
  double base_velocity = 0.0;
  base_in.attach(base);
  base_an.attach(base);
  base->add_option("--velocity", base_velocity, "wave velocity setting [m/s]")->required()->check(CLI::PositiveNumber);

  // experiment
  auto* exp = app.add_subcommand("experiment", "run an experiment matrix (default: 3 sections x 9 locations x 2 line types)");
  std::string exp_config;
  std::string exp_out;
  bool exp_timing = false;
  int exp_workers = 0;
  exp->add_option("config", exp_config, "matrix INI file (omit for the default matrix)")->check(CLI::ExistingFile);
  exp->add_option("-o,--output", exp_out, "result CSV path")->required();
  exp->add_flag("--timing", exp_timing, "add a runtime_ms column (output is then not reproducible)");
  exp->add_option("--workers", exp_workers, "parallel scenarios (TWLOC_WORKERS overrides)")->check(CLI::NonNegativeNumber);

  // plot
  auto* plt = app.add_subcommand("plot", "emit SVG plots for a measurement directory or an experiment CSV");
  std::string plt_in;
  std::string plt_out;
  AnalysisFlags plt_an;
  plt->add_option("results", plt_in, "measurement directory or experiment result CSV")->required();
  plt->add_option("-o,--output", plt_out, "output directory")->required();
  plt_an.attach(plt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) {
      const ScenarioConfig cfg = config::load_scenario(sim_config);
      const MeasurementSet ms = synthesize_measurements(cfg);
      io::write_measurement_set(sim_out, ms, {io::format_from_string(sim_format), sim_three_phase});
      std::cout << fmt::format("wrote {} (x/l = {:.4f}, a/l = {:.4f}, {} samples per device)\n", sim_out,
                               cfg.geometry.x_over_l, cfg.geometry.a_over_l, ms.waveforms[0].size());
    } else if (*loc) {
      const MeasurementSet ms = loc_in.load();
      const AnalysisParams params = loc_an.params();
      const LocalizationReport r = run_localization(ms, params);
      std::cout << io::summary_line(r) << '\n';
      print_truth(ms, r);
      if (!loc_out.empty()) write_text(loc_out, report_csv(r));
      if (!loc_dump.empty()) {
        fs::create_directories(loc_dump);
        const FrequencyGrid grid =
            central_frequencies(params.f_min, params.f_max, params.voices, ms.waveforms[0].sample_rate());
        for (int i = 0; i < 3; ++i) {
          io::write_scalogram_csv(fs::path(loc_dump) / (std::string(device_names[i]) + "_scalogram.csv"),
                                  cwt_morlet(ms.waveforms[i], grid, params.cwt.omega0));
        }
      }
    } else if (*chr) {
      const MeasurementSet ms = chr_in.load();
      const LocalizationReport r = run_localization(ms, chr_an.params());
      std::cout << fmt::format("clean section: {} of l ({})\n", r.characteristic.clean_fraction,
                               r.side == Side::LeftOfM2 ? "M2-M3" : "M2-M1");
      std::cout << fmt::format("{:>12} {:>12} {:>14} {:>14}\n", "f [kHz]", "alpha*l [Np]", "beta*l [rad]", "beta'*l [s]");
      for (const CharacteristicPoint& c : r.characteristic.points) {
        if (!c.valid) {
          std::cout << fmt::format("{:>12.2f} {:>12}\n", c.f_hz / 1e3, "invalid");
          continue;
        }
        std::cout << fmt::format("{:>12.2f} {:>12.5f} {:>14.4f} {:>14.6e}\n", c.f_hz / 1e3, c.alpha_l, c.beta_l,
                                 c.beta_prime_l);
      }
      std::cout << "beta*l is known up to a constant 2*pi*k / clean fraction offset\n";
      if (!chr_out.empty()) {
        std::ostringstream s;
        io::write_characteristic_csv(s, r);
        write_text(chr_out, s.str());
      }
    } else if (*base) {
      const MeasurementSet ms = base_in.load();
      if (!ms.line_length_m) throw UsageError("baseline needs the line length (--length or line_length_m in measurement.ini)");
      const LocalizationReport r = run_localization(ms, base_an.params());
      const double l = *ms.line_length_m;
      const BaselineResult b = baseline_from_report(r, base_velocity, l);
      std::cout << fmt::format("baseline (v = {:.6g} m/s, f = {:.1f} kHz): x = {:.1f} m, x/l = {:.6f}{}\n", base_velocity,
                               baseline_frequency(r).value_or(0.0) / 1e3, b.x_m, b.x_m / l,
                               b.extrapolated ? " (extrapolated outside the line)" : "");
      std::cout << "proposed: " << io::summary_line(r) << '\n';
      if (ms.truth) {
        const double x = ms.truth->x_over_l * l;
        std::cout << fmt::format("relative error: baseline {:.3e}, proposed {:.3e}\n", relative_error(b.x_m, x, l),
                                 relative_error(r.x_over_l, ms.truth->x_over_l, 1.0));
      }
    } else if (*exp) {
      ExperimentMatrix m = exp_config.empty() ? default_matrix() : config::load_matrix(exp_config);
      if (exp_timing) m.timing = true;
      if (exp_workers > 0) m.workers = exp_workers;
      const MatrixOutcome out = run_matrix(m, exp_out);
      std::cout << summary_text(out.summary);
      std::size_t failed = 0;
      for (const ResultRow& r : out.rows) failed += r.ok() ? 0 : 1;
      std::cout << fmt::format("{} scenarios, {} failed; rows in {}\n", out.rows.size(), failed, exp_out);
    } else if (*plt) {
      std::vector<fs::path> files;
      if (fs::is_directory(plt_in)) {
        const MeasurementSet ms = io::read_measurement_set(plt_in);
        const AnalysisParams params = plt_an.params();
        files = plot::emit_report_plots(ms, run_localization(ms, params), params, plt_out);
      } else {
        std::ifstream in(plt_in, std::ios::in | std::ios::binary);
        if (!in) throw Error(ErrorCode::Io, "cannot open '" + plt_in + "'");
        std::ostringstream text;
        text << in.rdbuf();
        files = plot::emit_matrix_plots(parse_result_csv(text.str()), plt_out);
        if (files.empty()) {
          std::cerr << "no result rows in " << plt_in << ", nothing plotted\n";
          return kMethod;
        }
      }
      for (const fs::path& f : files) std::cout << f.string() << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
