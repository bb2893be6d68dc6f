#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "twloc/cwt.hpp"
#include "twloc/simkit.hpp"

namespace twloc {

enum class Side { LeftOfM2, RightOfM2 };
std::string_view to_string(Side side);

struct SideDecision {
  Side side = Side::LeftOfM2;
  int votes_left = 0;
  int votes_right = 0;
  int abstained = 0;
};

// Per frequency: left iff (t3 - t2) * a/l >= (t1 - t2) * (1 - a/l), majority vote.
// Frequencies whose margin is below one sample period abstain.
SideDecision side_detect(const ArrivalFeature& m1, const ArrivalFeature& m2, const ArrivalFeature& m3, double a_over_l,
                         int quorum = 5);

struct DeltaTimesPoint {
  double f_hz = 0.0;
  double dt31 = 0.0;  // t3 - t1 in the (possibly mirrored) frame
  double dt32 = 0.0;  // t3 - t2
  bool valid = false;
};

struct DeltaTimes {
  std::vector<DeltaTimesPoint> points;
  // RightOfM2 events are handled in a mirrored frame (M1 <-> M3, a -> l - a).
  bool mirrored = false;
  double sample_rate = 0.0;
};

DeltaTimes delta_times(const ArrivalFeature& m1, const ArrivalFeature& m2, const ArrivalFeature& m3, Side side);

struct LocationPoint {
  double f_hz = 0.0;
  double x_over_l = 0.0;  // clamped to [0, 1]
  double raw = 0.0;       // unclamped
  bool valid = false;
};

// x/l = 1/2 - (1 - a/l)/2 * dt31/dt32, evaluated in the frame of `dt` and
// reported in the original frame. |dt32| below one sample period is invalid.
std::vector<LocationPoint> localize(const DeltaTimes& dt, double a_over_l);

struct CharacteristicPoint {
  double f_hz = 0.0;
  double alpha_l = 0.0;       // Np, alpha(f) * l
  double beta_l = 0.0;        // rad, beta(f) * l modulo an unresolved 2 pi k / clean_fraction offset
  double beta_prime_l = 0.0;  // beta'(f) * l; group delay over the whole line is beta_prime_l / 2 pi
  bool valid = false;
};

struct CharacteristicEstimate {
  std::vector<CharacteristicPoint> points;
  double clean_fraction = 0.0;  // length of the event-free section over l
};

// Uses the event-free section between the middle device and `far_end`.
CharacteristicEstimate characterize(const ArrivalFeature& middle, const ArrivalFeature& far_end, double clean_fraction);

// Unwraps a phase sequence in place (jumps larger than pi are folded by 2 pi).
void unwrap_phase(std::vector<double>& phase);

struct AggregateResult {
  double x_hat = 0.0;
  double sigma = 0.0;
  int n_valid = 0;  // survivors after outlier rejection
  int n_outliers = 0;
  std::vector<bool> outlier;  // per input entry
};

// Median absolute deviation rejection (|x - median| > k * 1.4826 * MAD), then
// mean and sample standard deviation of the survivors.
AggregateResult aggregate(const std::vector<double>& values, const std::vector<bool>& valid, int quorum = 5,
                          double mad_k = 3.0);

struct BaselineResult {
  double x_m = 0.0;
  bool extrapolated = false;
};

// Classical double-terminal estimate from M1: x = (l - v (t3 - t1)) / 2.
BaselineResult baseline_double_terminal(double t1, double t3, double velocity, double length_m);

struct AnalysisParams {
  double f_min = 100e3;
  double f_max = 1e6;
  int voices = 12;
  CwtSettings cwt;
  int quorum = 5;
  double mad_k = 3.0;

  void validate() const;
};

struct LocalizationReport {
  std::vector<double> frequencies;
  std::vector<LocationPoint> per_frequency;
  std::vector<bool> outlier;
  double x_over_l = 0.0;
  double sigma = 0.0;
  Side side = Side::LeftOfM2;
  SideDecision side_votes;
  DeltaTimes delta;
  CharacteristicEstimate characteristic;
  int n_valid = 0;
  int n_outliers = 0;
  std::array<ArrivalFeature, 3> features;
  double a_over_l = 0.5;
  std::optional<double> line_length_m;

  // Diagnostic estimators comparing amplitudes and phase shifts instead of times.
  std::vector<LocationPoint> by_amplitude;
  std::vector<LocationPoint> by_phase;
  std::optional<double> x_over_l_amplitude;
  std::optional<double> x_over_l_phase;
};

// Steps II-VI for modal (already Clarke-transformed) waveforms.
LocalizationReport run_localization(const MeasurementSet& ms, const AnalysisParams& params);

// Same pipeline from pre-computed arrival features (steps V-VI).
LocalizationReport locate_from_features(std::array<ArrivalFeature, 3> features, double a_over_l, const AnalysisParams& params);

// Baseline with the single timestamp per device taken at the highest central
// frequency that is valid on both M1 and M3.
BaselineResult baseline_from_report(const LocalizationReport& report, double velocity, double length_m);
std::optional<double> baseline_frequency(const LocalizationReport& report);

}  // namespace twloc
