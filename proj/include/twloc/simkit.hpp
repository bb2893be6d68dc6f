#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "twloc/fft.hpp"
#include "twloc/model.hpp"

namespace twloc {

struct ReflectionConfig {
  double rho_left = 0.0;
  double rho_right = 0.0;
  int max_bounces = 1;
};

struct ScenarioConfig {
  LineGeometry geometry;
  PropagationModel model;
  SourceParams source;
  double sample_rate = 100e6;
  double duration = 1e-3;
  std::optional<double> snr_db;  // relative to the source peak; nullopt = noiseless
  std::uint64_t noise_seed = 1;
  std::array<double, 3> desync_offsets{0.0, 0.0, 0.0};
  std::optional<ReflectionConfig> reflections;
  // Highest frequency the analysis will look at; only used for validation.
  double analysis_f_max = 1e6;

  // Throws Error::validation naming the offending field.
  void validate() const;
  double launch_time() const;
};

struct ScenarioTruth {
  double x_over_l = 0.0;
  PropagationModel model;
};

inline constexpr std::array<const char*, 3> device_names{"M1", "M2", "M3"};

struct MeasurementSet {
  std::array<Waveform, 3> waveforms;
  double a_over_l = 0.5;
  std::optional<double> line_length_m;  // reporting only; the method uses ratios
  std::optional<ScenarioTruth> truth;
};

// Frequency-domain propagation: output = IFFT(FFT(input) * exp(-distance * gamma(f))).
// Throws WindowOverflow when the delayed arrival would fall outside the window.
Waveform propagate(const Waveform& source, const PropagationModel& model, double distance_m);

// Propagates one source over many distances, reusing the source spectrum.
class Propagator {
 public:
  Propagator(const Waveform& source, const PropagationModel& model);

  // Raw propagated samples over the source window.
  std::vector<double> samples_at(double distance_m) const;
  // Time of the source peak plus the front delay distance / v_inf.
  double arrival_time(double distance_m) const;
  std::size_t fft_length() const noexcept { return fft_length_; }

  // Complex transfer function exp(-distance * gamma) on bins 0..fft_length/2.
  // The Nyquist bin keeps only the real part so the inverse is exactly real.
  fft::ComplexVector transfer_function(double distance_m) const;

 private:
  PropagationModel model_;
  std::size_t size_;
  double sample_rate_;
  double t0_;
  std::size_t fft_length_;
  fft::ComplexVector spectrum_;
  double peak_time_;
};

MeasurementSet synthesize_measurements(const ScenarioConfig& cfg);

// Noiseless, synchronized measurements; synthesize_measurements adds noise and desync on top.
MeasurementSet synthesize_clean(const ScenarioConfig& cfg);

// Adds N(0, sigma^2) with sigma = peak_ref * 10^(-snr_db / 20). snr_db = +inf is a no-op.
Waveform add_awgn(const Waveform& w, double snr_db, double peak_ref, std::uint64_t seed);

// Per-device noise seed derived from the scenario seed.
std::uint64_t device_seed(std::uint64_t scenario_seed, int device);

// Shifts each waveform by round(offset * sample_rate) samples (circular).
MeasurementSet apply_desync(const MeasurementSet& ms, const std::array<double, 3>& offsets);

Waveform shift_samples(const Waveform& w, long long shift);

}  // namespace twloc
