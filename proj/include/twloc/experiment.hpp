#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "twloc/locator.hpp"
#include "twloc/simkit.hpp"

namespace twloc {

// |x_measured - x_true| / l
double relative_error(double x_measured, double x_true, double length);

struct LinePreset {
  std::string name;  // "a", "b", "c"
  double length_m = 0.0;
  double a_over_l = 0.5;
  double duration = 1e-3;
};

// One line type: propagation preset paired with its event source.
struct LineCase {
  std::string model_name;
  PropagationModel model;
  SourceParams source;
};

struct ExperimentMatrix {
  std::vector<LinePreset> lines;
  std::vector<LineCase> cases;
  std::vector<double> location_factors;  // x/l = factor * a/l
  std::vector<std::optional<double>> noise_levels;  // nullopt = noiseless, run once
  std::vector<std::uint64_t> seeds;
  std::vector<std::array<double, 3>> desync_cases;
  double sample_rate = 100e6;
  double velocity_error = 0.02;  // stale-parameter baseline at v * (1 -+ error)
  AnalysisParams analysis;
  int workers = 0;                // 0 = hardware concurrency (TWLOC_WORKERS overrides)
  bool timing = false;            // adds runtime_ms to the CSV (breaks byte-identity)

  void validate() const;
  std::size_t scenario_count() const;
};

// Sections a/b/c with both line types, n/10 * a for n = 1..9, noiseless, in sync.
ExperimentMatrix default_matrix();
LinePreset line_preset(std::string_view name);

struct Scenario {
  std::size_t id = 0;
  const LinePreset* line = nullptr;
  const LineCase* line_case = nullptr;
  double location_factor = 0.0;
  std::optional<double> snr_db;
  std::uint64_t seed = 0;
  std::array<double, 3> desync{};

  ScenarioConfig config(double sample_rate, double f_max) const;
};

std::vector<Scenario> enumerate(const ExperimentMatrix& matrix);

struct ResultRow {
  std::size_t id = 0;
  std::string section;
  std::string model;
  std::string source;
  double length_m = 0.0;
  double a_over_l = 0.0;
  double x_true = 0.0;
  std::optional<double> snr_db;
  std::uint64_t seed = 0;
  std::array<double, 3> desync{};

  std::string status = "ok";  // error code name on failure
  std::string step;
  double x_hat = 0.0;
  double x_error = 0.0;
  double sigma = 0.0;
  int n_valid = 0;
  int n_outliers = 0;
  std::string side;
  double baseline_f_hz = 0.0;
  double baseline_error_low = 0.0;   // velocity * (1 - velocity_error)
  double baseline_error_high = 0.0;  // velocity * (1 + velocity_error)
  double alpha_l_error = 0.0;        // worst relative error over valid frequencies
  double beta_prime_l_error = 0.0;
  double runtime_ms = 0.0;

  bool ok() const noexcept { return status == "ok"; }
};

ResultRow run_scenario(const Scenario& s, const ExperimentMatrix& matrix);

// Runs every scenario (concurrently), sorted by id. Scenario failures become rows.
std::vector<ResultRow> run_rows(const ExperimentMatrix& matrix);

std::string_view result_csv_header(bool timing);
std::string result_csv(const std::vector<ResultRow>& rows, bool timing);
std::vector<ResultRow> parse_result_csv(const std::string& text);

struct GroupSummary {
  std::string section;
  std::string model;
  std::string source;
  double length_m = 0.0;
  std::size_t total = 0;
  std::size_t ok = 0;
  double mean_error = 0.0;
  double worst_error = 0.0;
  double std_error = 0.0;
  double mean_baseline_error = 0.0;
};

std::vector<GroupSummary> summarize(const std::vector<ResultRow>& rows);
std::string summary_text(const std::vector<GroupSummary>& groups);

struct MatrixOutcome {
  std::vector<ResultRow> rows;
  std::vector<GroupSummary> summary;
};

// Writes the CSV to out_path and the summary to <out_path>.summary.txt.
// An unwritable output fails with an I/O error before any scenario runs.
MatrixOutcome run_matrix(const ExperimentMatrix& matrix, const std::filesystem::path& out_path);

}  // namespace twloc
