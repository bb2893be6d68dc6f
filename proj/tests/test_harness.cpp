#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "twloc/config.hpp"
#include "twloc/error.hpp"
#include "twloc/experiment.hpp"
#include "twloc/io.hpp"
#include "twloc/plot.hpp"

using namespace twloc;
namespace fs = std::filesystem;
using doctest::Approx;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("twloc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string field_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Validation);
    return e.field();
  }
  FAIL("expected a validation error");
  return {};
}

constexpr const char* kScenario = R"(
[line]
length_m = 65400
a_over_l = 0.5
x_over_l = 0.3
model = cable

[source]
kind = pd

[noise]
snr_db = 60
seed = 4

[desync]
m1 = 200e-9
)";

// 1 section x 1 case x 2 locations x (noiseless + 2 seeds) = 6 scenarios
constexpr const char* kSmallMatrix = R"(
[matrix]
sections = c
cases = cable:pd
location_factors = 0.3, 0.7
snr_db = none, 60
seeds = 1-2
workers = 2
)";

}  // namespace

TEST_CASE("relative error") {
  CHECK(relative_error(1234.0, 1234.0, 1e4) == 0.0);
  CHECK(relative_error(5010.0, 5000.0, 1e4) == Approx(0.001));
  CHECK_THROWS_AS(relative_error(1.0, 1.0, 0.0), Error);
}

TEST_CASE("scenario config") {
  const ScenarioConfig cfg = config::parse_scenario(kScenario);
  CHECK(cfg.geometry.length_m == 65400.0);
  CHECK(cfg.geometry.x_over_l == 0.3);
  CHECK(cfg.model.v_inf == model_preset("cable").v_inf);
  CHECK(cfg.source.kind == SourceKind::PartialDischarge);
  CHECK(cfg.snr_db.value() == 60.0);
  CHECK(cfg.noise_seed == 4);
  CHECK(cfg.desync_offsets[0] == 200e-9);
  CHECK_FALSE(cfg.reflections);

  const ScenarioConfig refl = config::parse_scenario(std::string(kScenario) + "[reflections]\nrho_right = -0.5\n");
  REQUIRE(refl.reflections);
  CHECK(refl.reflections->rho_right == -0.5);

  CHECK(field_of([] { config::parse_scenario("[line]\nlength_m = 1000\nx_over_l = 0.3\nlenght = 3\n"); }) == "line.lenght");
  CHECK(field_of([] { config::parse_scenario("[line]\nlength_m = abc\nx_over_l = 0.3\n"); }) == "line.length_m");
  CHECK(field_of([] { config::parse_scenario("[line]\nx_over_l = 0.3\n"); }) == "line.length_m");
  CHECK(field_of([] { config::parse_scenario("[line]\nlength_m = 1000\nx_over_l = 1.3\n"); }) == "x_over_l");
  CHECK(field_of([] { config::parse_scenario("[line]\nlength_m = 1000\nx_over_l = 0.3\nmodel = wire\n"); }) == "line.model");
  CHECK(field_of([] { config::parse_scenario("[line]\nlength_m = 1000\nx_over_l = 0.3\n[source]\nkind = spark\n"); }) ==
        "source.kind");
  CHECK(field_of([] { config::parse_scenario("[line]\nlength_m = 1000\nx_over_l = 0.3\n[desync]\nm2 = 1e-3\n"); }) ==
        "desync_offsets");
  CHECK(field_of([] { config::parse_scenario("[line]\nlength_m = 1000\nx_over_l = 0.3\n[analysis]\nvoices = 0\n"); }) ==
        "voices");
  CHECK(field_of([] { config::parse_scenario("[lines]\nlength_m = 1000\n"); }) == "lines");
}

TEST_CASE("matrix config") {
  const ExperimentMatrix m = config::parse_matrix(kSmallMatrix);
  CHECK(m.lines.size() == 1);
  CHECK(m.lines[0].length_m == 35.4e3);
  CHECK(m.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(m.scenario_count() == 6);
  CHECK(m.workers == 2);

  const ExperimentMatrix d = default_matrix();
  CHECK(d.scenario_count() == 54);
  ExperimentMatrix noisy = d;
  noisy.noise_levels.push_back(60.0);
  noisy.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(noisy.scenario_count() == 54 + 540);

  const ExperimentMatrix custom =
      config::parse_matrix("[matrix]\nsections = x\n[section.x]\nlength_m = 5000\na_over_l = 0.3\nduration = 5e-4\n");
  CHECK(custom.lines[0].name == "x");
  CHECK(custom.lines[0].duration == 5e-4);

  CHECK(field_of([] { config::parse_matrix("[matrix]\nsections = q\n"); }) == "matrix.sections");
  CHECK(field_of([] { config::parse_matrix("[matrix]\nlocation_factors = 3.0\n"); }) == "locations");
  CHECK(field_of([] { config::parse_matrix("[matrix]\ncases = cable\n"); }) == "matrix.cases");
  CHECK(field_of([] { config::parse_matrix("[matrix]\nseeds = 5-1\n"); }) == "matrix.seeds");
  CHECK(field_of([] { config::parse_matrix("[matrix]\ndesync = 1 2\n"); }) == "matrix.desync");
  CHECK(field_of([] { config::parse_matrix("[matrix]\nsections = x\n[section.x]\nlength_m = 5000\n"); }) ==
        "section.x.a_over_l");
  CHECK(field_of([] { config::parse_matrix("[matrix]\nspeed = 3\n"); }) == "matrix.speed");
  ExperimentMatrix empty = d;
  empty.location_factors.clear();
  CHECK(field_of([&] { empty.validate(); }) == "locations");
}

TEST_CASE("waveform files round trip exactly") {
  const fs::path dir = scratch("waveform");
  std::vector<double> s{0.0, 1.0 / 3.0, -2.5e-300, 1e300, std::nextafter(1.0, 2.0), -0.0};
  const Waveform w(s, 100e6, 1.0 / 7.0);
  io::write_waveform_binary(dir / "w.bin", w, "M2");
  io::write_waveform_csv(dir / "w.csv", w, "M2");
  for (const char* name : {"w.bin", "w.csv"}) {
    const io::LoadedWaveform r = io::read_waveform(dir / name);
    CHECK(r.device == "M2");
    CHECK(r.waveform.sample_rate() == w.sample_rate());
    CHECK(r.waveform.t0() == w.t0());
    REQUIRE(r.waveform.size() == w.size());
    for (std::size_t k = 0; k < w.size(); ++k) CHECK(std::bit_cast<std::uint64_t>(r.waveform[k]) == std::bit_cast<std::uint64_t>(w[k]));
  }
  CHECK(slurp(dir / "w.csv").starts_with("# sample_rate=100000000 t0=0.14285714285714285 device=M2\ntime_s,value\n"));

  io::write_three_phase_csv(dir / "p.csv", w, "M1");
  const Waveform z = io::read_waveform(dir / "p.csv").waveform;
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(z[k] == Approx(w[k]).epsilon(1e-12));

  std::ofstream(dir / "bad.csv") << "# sample_rate=1e6 t0=0\ntime_s,value\n0,abc\n";
  std::ofstream(dir / "cols.csv") << "# sample_rate=1e6 t0=0\ntime_s,x\n0,1\n";
  std::ofstream(dir / "nohdr.csv") << "time_s,value\n0,1\n";
  for (const char* name : {"bad.csv", "cols.csv", "nohdr.csv", "missing.bin"}) {
    try {
      io::read_waveform(dir / name);
      FAIL("no throw for " << name);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Io);
    }
  }
  {
    std::ofstream trunc(dir / "trunc.bin", std::ios::binary);
    trunc << "# twloc-waveform sample_rate=1e6 t0=0 device=M1 samples=10\n1234";
  }
  CHECK_THROWS_AS(io::read_waveform(dir / "trunc.bin"), Error);
}

TEST_CASE("simulate -> files -> locate equals the in-memory pipeline") {
  const ScenarioConfig cfg = config::parse_scenario(kScenario);
  const MeasurementSet ms = synthesize_measurements(cfg);
  const LocalizationReport mem = run_localization(ms, {});
  std::ostringstream mem_csv;
  io::write_report_csv(mem_csv, mem);

  for (const auto format : {io::WaveformFormat::Binary, io::WaveformFormat::Csv}) {
    const fs::path dir = scratch(std::string("set_") + std::string(io::to_string(format)));
    io::write_measurement_set(dir, ms, {format, false});
    const MeasurementSet back = io::read_measurement_set(dir);
    CHECK(back.a_over_l == ms.a_over_l);
    CHECK(back.line_length_m == ms.line_length_m);
    REQUIRE(back.truth);
    CHECK(back.truth->x_over_l == ms.truth->x_over_l);
    CHECK(back.truth->model.k_disp == ms.truth->model.k_disp);
    const LocalizationReport disk = run_localization(back, {});
    std::ostringstream disk_csv;
    io::write_report_csv(disk_csv, disk);
    CHECK(disk_csv.str() == mem_csv.str());
    CHECK(disk.x_over_l == mem.x_over_l);
  }

  const fs::path three = scratch("set_three_phase");
  io::write_measurement_set(three, ms, {io::WaveformFormat::Csv, true});
  const LocalizationReport tp = run_localization(io::read_measurement_set(three), {});
  CHECK(tp.x_over_l == Approx(mem.x_over_l).epsilon(1e-9));

  CHECK_THROWS_AS(io::read_measurement_set(scratch("empty_set")), Error);
}

TEST_CASE("report CSV schema") {
  CHECK(io::report_csv_header() ==
        "kind,f_hz,x_over_l,x_raw,valid,outlier,t_m1,t_m2,t_m3,amp_m1,amp_m2,amp_m3,alpha_l,beta_l,beta_prime_l,sigma,"
        "n_valid,n_outliers,side");
  CHECK(result_csv_header(false) ==
        "scenario,section,model,source,length_m,a_over_l,x_true_over_l,snr_db,seed,desync_m1_s,desync_m2_s,desync_m3_s,"
        "status,step,x_hat_over_l,x_error,sigma,n_valid,n_outliers,side,baseline_f_hz,baseline_error_low,"
        "baseline_error_high,alpha_l_error,beta_prime_l_error");
  CHECK(std::string(result_csv_header(true)).ends_with(",runtime_ms"));
  CHECK(io::characteristic_csv_header() == "f_hz,valid,alpha_l,beta_l,beta_prime_l,group_delay_s");

  ScenarioConfig cfg = config::parse_scenario(kScenario);
  cfg.snr_db.reset();
  cfg.desync_offsets = {0.0, 0.0, 0.0};
  const LocalizationReport r = run_localization(synthesize_measurements(cfg), {});
  std::ostringstream csv;
  io::write_report_csv(csv, r);
  std::istringstream lines(csv.str());
  std::string line;
  std::string last;
  std::size_t rows = 0;
  const std::size_t columns = std::count(io::report_csv_header().begin(), io::report_csv_header().end(), ',');
  while (std::getline(lines, line)) {
    CHECK(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) == columns);
    ++rows;
    last = line;
  }
  CHECK(rows == r.frequencies.size() + 2);
  CHECK(last.starts_with("aggregate,"));
  CHECK(io::summary_line(r).starts_with("x/l = 0.3000 ± "));
}

TEST_CASE("experiment matrix") {
  const ExperimentMatrix m = config::parse_matrix(kSmallMatrix);
  const fs::path dir = scratch("matrix");
  const MatrixOutcome a = run_matrix(m, dir / "a.csv");
  const MatrixOutcome b = run_matrix(m, dir / "b.csv");
  REQUIRE(a.rows.size() == 6);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].id == i);
    CHECK(a.rows[i].ok());
    CHECK(a.rows[i].x_error < 1e-2);
    CHECK(a.rows[i].x_error >= 0.0);
  }
  CHECK(a.rows[0].x_error < 1e-3);
  CHECK_FALSE(a.rows[0].snr_db);
  CHECK(a.rows[1].seed == 1);
  CHECK(a.rows[2].seed == 2);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(fs::exists(dir / "a.csv.summary.txt"));

  const std::vector<ResultRow> parsed = parse_result_csv(slurp(dir / "a.csv"));
  REQUIRE(parsed.size() == a.rows.size());
  CHECK(result_csv(parsed, false) == slurp(dir / "a.csv"));

  REQUIRE(a.summary.size() == 1);
  CHECK(a.summary[0].total == 6);
  CHECK(a.summary[0].ok == 6);
  CHECK(a.summary[0].worst_error >= a.summary[0].mean_error);
  CHECK(summary_text(a.summary).find("cable") != std::string::npos);

  try {
    run_matrix(m, dir / "no_such_dir" / "out.csv");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }

  // scenario failures become rows, the batch continues
  ExperimentMatrix bad = m;
  bad.location_factors = {0.3, 1.0};
  bad.lines[0].a_over_l = 0.5;
  bad.noise_levels = {std::nullopt};
  const std::vector<ResultRow> rows = run_rows(bad);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].ok());
  CHECK(rows[1].status == "ambiguous-side");
  CHECK(rows[1].step == "V. side detection");
}

TEST_CASE("plots") {
  ScenarioConfig cfg = config::parse_scenario(kScenario);
  cfg.snr_db.reset();
  const MeasurementSet ms = synthesize_measurements(cfg);
  const AnalysisParams params;
  const LocalizationReport r = run_localization(ms, params);
  const fs::path dir = scratch("plots");
  const auto files = plot::emit_report_plots(ms, r, params, dir);
  CHECK(files.size() == 7);
  int waveforms = 0;
  int scalograms = 0;
  for (const auto& f : files) {
    CHECK(fs::file_size(f) > 0);
    const std::string name = f.filename().string();
    waveforms += name.ends_with("_waveform.svg") ? 1 : 0;
    scalograms += name.ends_with("_scalogram.svg") ? 1 : 0;
  }
  CHECK(waveforms == 3);
  CHECK(scalograms == 3);

  // markers in the scalogram carry the exact arrival timestamps
  const std::string svg = slurp(dir / "M3_scalogram.svg");
  const std::regex marker("data-f-hz=\"([^\"]+)\" data-t-max=\"([^\"]+)\"");
  std::size_t i = 0;
  std::size_t matched = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), marker); it != std::sregex_iterator(); ++it) {
    while (i < r.features[2].size() && !r.features[2][i].valid) ++i;
    REQUIRE(i < r.features[2].size());
    CHECK(std::stod((*it)[1]) == r.features[2][i].f_hz);
    CHECK(std::stod((*it)[2]) == r.features[2][i].t_max);
    ++i;
    ++matched;
  }
  CHECK(matched == static_cast<std::size_t>(std::count_if(r.features[2].points.begin(), r.features[2].points.end(),
                                                          [](const ArrivalPoint& p) { return p.valid; })));

  CHECK(plot::emit_matrix_plots({}, dir / "empty").empty());
  CHECK_FALSE(fs::exists(dir / "empty"));
  ResultRow row;
  row.x_error = 1e-4;
  const auto mfiles = plot::emit_matrix_plots({row, row}, dir / "matrix");
  CHECK(mfiles.size() == 2);
}
