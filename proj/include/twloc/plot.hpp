#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "twloc/cwt.hpp"
#include "twloc/experiment.hpp"
#include "twloc/locator.hpp"

namespace twloc::plot {

// Static SVG emitters. Every function writes exactly one file and throws an
// I/O error if it cannot.

void waveform_svg(const std::filesystem::path& path, const Waveform& w, const std::string& title,
                  std::optional<double> marker_time = std::nullopt);

// Heat map of |W| with one <circle class="maximum"> per valid arrival point,
// carrying data-f-hz and data-t-max attributes with the exact values.
void scalogram_svg(const std::filesystem::path& path, const Scalogram& sg, const ArrivalFeature& feature,
                   const std::string& title);

// Per-frequency x(f)/l with outliers marked and the aggregate as a band.
void location_svg(const std::filesystem::path& path, const LocalizationReport& report);

// x_error per scenario (log scale) grouped by section and case, plus a histogram.
void error_scatter_svg(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
void error_histogram_svg(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

// Single scenario: 3 waveform panels, 3 scalograms and the location plot.
std::vector<std::filesystem::path> emit_report_plots(const MeasurementSet& ms, const LocalizationReport& report,
                                                     const AnalysisParams& params, const std::filesystem::path& dir);

// Matrix results; an empty row set writes nothing and returns an empty list.
std::vector<std::filesystem::path> emit_matrix_plots(const std::vector<ResultRow>& rows, const std::filesystem::path& dir);

}  // namespace twloc::plot
