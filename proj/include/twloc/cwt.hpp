#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "twloc/fft.hpp"
#include "twloc/model.hpp"

namespace twloc {

struct FrequencyGrid {
  std::vector<double> frequencies;  // Hz, strictly increasing
  int voices_per_octave = 12;

  std::size_t size() const noexcept { return frequencies.size(); }
};

// Log2-spaced grid from f_min to f_max inclusive. When the band is not a whole
// number of voices the step is stretched slightly so both endpoints are hit.
FrequencyGrid central_frequencies(double f_min, double f_max, int voices, double sample_rate);

// Morlet scale s = omega0 / (2 pi f) in seconds.
double morlet_scale(double f_hz, double omega0);
// Time support of the scaled wavelet: 8 standard deviations of its envelope.
double wavelet_support(double f_hz, double omega0);

struct CwtSettings {
  double omega0 = 6.0;
  double threshold_rel = 0.3;      // first-arrival crossing level
  double min_peak_to_floor = 6.0;  // coherence check against the median |W|
};

class Scalogram {
 public:
  Scalogram(FrequencyGrid grid, std::size_t samples, double sample_rate, double t0, double omega0);

  const FrequencyGrid& grid() const noexcept { return grid_; }
  std::size_t rows() const noexcept { return grid_.size(); }
  std::size_t cols() const noexcept { return cols_; }
  double sample_rate() const noexcept { return sample_rate_; }
  double t0() const noexcept { return t0_; }
  double omega0() const noexcept { return omega0_; }

  std::span<const std::complex<double>> row(std::size_t i) const;
  std::span<std::complex<double>> row(std::size_t i);

 private:
  FrequencyGrid grid_;
  std::size_t cols_;
  double sample_rate_;
  double t0_;
  double omega0_;
  std::vector<std::complex<double>> data_;
};

// Holds the spectrum of one waveform and produces CWT rows one scale at a
// time, so callers never need the full scalogram in memory.
class CwtEngine {
 public:
  CwtEngine(const Waveform& w, double omega0, double f_lowest);

  // Complex Morlet coefficients at central frequency f, L2 normalized.
  void transform(double f_hz, std::vector<std::complex<double>>& out) const;

  std::size_t samples() const noexcept { return samples_; }
  double sample_rate() const noexcept { return sample_rate_; }
  double t0() const noexcept { return t0_; }
  double omega0() const noexcept { return omega0_; }

 private:
  std::size_t samples_;
  double sample_rate_;
  double t0_;
  double omega0_;
  std::size_t fft_length_;
  fft::ComplexVector spectrum_;  // bins 0..fft_length/2
};

// Throws ErrorCode::Window when no sample is clear of the edge regions at the lowest frequency.
Scalogram cwt_morlet(const Waveform& w, const FrequencyGrid& grid, double omega0 = 6.0);

// Samples [edge, samples - edge) are trusted at frequency f.
std::size_t edge_samples(double f_hz, double omega0, double sample_rate);

struct ArrivalWindow {
  std::size_t begin = 0;  // inclusive sample index
  std::size_t end = 0;    // exclusive
  std::size_t crossing = 0;
  bool valid = false;
};

ArrivalWindow detect_first_arrival_row(std::span<const std::complex<double>> row, double f_hz, double sample_rate,
                                       double omega0, double threshold_rel);

std::vector<ArrivalWindow> detect_first_arrival(const Scalogram& sg, double threshold_rel = 0.3);

struct ArrivalPoint {
  double f_hz = 0.0;
  double t_max = 0.0;      // seconds, in the waveform's time base
  double amplitude = 0.0;  // interpolated |W|
  double phase = 0.0;      // arg W at the nearest sample, (-pi, pi]
  bool valid = false;
};

struct ArrivalFeature {
  std::vector<ArrivalPoint> points;
  double sample_rate = 0.0;

  std::size_t size() const noexcept { return points.size(); }
  const ArrivalPoint& operator[](std::size_t i) const { return points[i]; }
};

ArrivalPoint scale_maximum_row(std::span<const std::complex<double>> row, double f_hz, const ArrivalWindow& window,
                               double sample_rate, double t0, double omega0, double min_peak_to_floor);

ArrivalFeature scale_maxima(const Scalogram& sg, const std::vector<ArrivalWindow>& windows,
                            double min_peak_to_floor = 6.0);

// Steps III-IV for one channel without materializing the scalogram.
ArrivalFeature analyze_channel(const Waveform& w, const FrequencyGrid& grid, const CwtSettings& settings);

}  // namespace twloc
