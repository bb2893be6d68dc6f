#pragma once

#include <filesystem>
#include <string>

#include "twloc/experiment.hpp"
#include "twloc/locator.hpp"
#include "twloc/simkit.hpp"

namespace twloc::config {

// INI files with sections; see README.md for the key reference.
// Unknown keys are rejected so typos surface as named validation errors.

ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario(const std::string& text);

// [analysis] section; missing section or keys keep the defaults.
AnalysisParams load_analysis(const std::filesystem::path& path);
AnalysisParams parse_analysis(const std::string& text);

ExperimentMatrix load_matrix(const std::filesystem::path& path);
ExperimentMatrix parse_matrix(const std::string& text);

}  // namespace twloc::config
