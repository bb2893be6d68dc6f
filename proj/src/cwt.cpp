#include "twloc/cwt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "twloc/error.hpp"

namespace twloc {

FrequencyGrid central_frequencies(double f_min, double f_max, int voices, double sample_rate) {
  if (!(f_min > 0.0) || !(f_max > f_min) || !(f_max < sample_rate / 2.0)) {
    throw Error(ErrorCode::Parameter, "frequency band must satisfy 0 < f_min < f_max < sample_rate / 2");
  }
  if (voices < 1) {
    throw Error(ErrorCode::Parameter, "voices per octave must be >= 1");
  }
  const double octaves = std::log2(f_max / f_min);
  const auto steps = std::max<long>(1, std::lround(octaves * voices));
  FrequencyGrid grid;
  grid.voices_per_octave = voices;
  grid.frequencies.reserve(static_cast<std::size_t>(steps) + 1);
  for (long i = 0; i <= steps; ++i) {
    grid.frequencies.push_back(f_min * std::exp2(octaves * static_cast<double>(i) / static_cast<double>(steps)));
  }
  grid.frequencies.back() = f_max;
  return grid;
}

double morlet_scale(double f_hz, double omega0) { return omega0 / (2.0 * std::numbers::pi * f_hz); }

double wavelet_support(double f_hz, double omega0) { return 8.0 * morlet_scale(f_hz, omega0); }

std::size_t edge_samples(double f_hz, double omega0, double sample_rate) {
  return static_cast<std::size_t>(std::ceil(wavelet_support(f_hz, omega0) * sample_rate));
}

Scalogram::Scalogram(FrequencyGrid grid, std::size_t samples, double sample_rate, double t0, double omega0)
    : grid_(std::move(grid)),
      cols_(samples),
      sample_rate_(sample_rate),
      t0_(t0),
      omega0_(omega0),
      data_(grid_.size() * samples) {}

std::span<const std::complex<double>> Scalogram::row(std::size_t i) const {
  return std::span<const std::complex<double>>(data_).subspan(i * cols_, cols_);
}

std::span<std::complex<double>> Scalogram::row(std::size_t i) {
  return std::span<std::complex<double>>(data_).subspan(i * cols_, cols_);
}

CwtEngine::CwtEngine(const Waveform& w, double omega0, double f_lowest)
    : samples_(w.size()), sample_rate_(w.sample_rate()), t0_(w.t0()), omega0_(omega0) {
  if (!(omega0 >= 5.0)) {
    throw Error(ErrorCode::Parameter, "omega0 must be >= 5 for an admissible Morlet wavelet");
  }
  if (!(f_lowest > 0.0)) {
    throw Error(ErrorCode::Parameter, "lowest analysis frequency must be positive");
  }
  const std::size_t edge = edge_samples(f_lowest, omega0, sample_rate_);
  if (samples_ <= 2 * edge) {
    throw Error(ErrorCode::Window, "signal window is shorter than the wavelet support at the lowest frequency");
  }
  // Padding of half a support keeps circular wrap-around inside the untrusted edges.
  fft_length_ = fft::good_size(samples_ + edge / 2);
  spectrum_ = fft::forward_real(w.samples(), fft_length_);
}

void CwtEngine::transform(double f_hz, std::vector<std::complex<double>>& out) const {
  const double s = morlet_scale(f_hz, omega0_);
  const double norm = std::sqrt(s) * std::pow(std::numbers::pi, -0.25) * std::sqrt(2.0 * std::numbers::pi);
  const double bin_omega = 2.0 * std::numbers::pi * sample_rate_ / static_cast<double>(fft_length_);

  // Gaussian in s*omega centered on omega0; beyond +-10 it is below 1e-21.
  const double lo = std::max(0.0, (omega0_ - 10.0) / (s * bin_omega));
  const double hi = std::min(static_cast<double>(fft_length_ / 2), (omega0_ + 10.0) / (s * bin_omega));

  fft::ComplexVector buf(fft_length_, fft::cplx(0.0, 0.0));
  for (auto k = static_cast<std::size_t>(std::ceil(lo)); k <= static_cast<std::size_t>(hi); ++k) {
    const double u = s * bin_omega * static_cast<double>(k) - omega0_;
    buf[k] = spectrum_[k] * (norm * std::exp(-0.5 * u * u));
  }
  fft::inverse_complex(buf);
  out.assign(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(samples_));
}

Scalogram cwt_morlet(const Waveform& w, const FrequencyGrid& grid, double omega0) {
  if (grid.frequencies.empty()) {
    throw Error(ErrorCode::Parameter, "empty frequency grid");
  }
  const CwtEngine engine(w, omega0, grid.frequencies.front());
  Scalogram sg(grid, w.size(), w.sample_rate(), w.t0(), omega0);
  std::vector<std::complex<double>> row;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    engine.transform(grid.frequencies[i], row);
    std::copy(row.begin(), row.end(), sg.row(i).begin());
  }
  return sg;
}

ArrivalWindow detect_first_arrival_row(std::span<const std::complex<double>> row, double f_hz, double sample_rate,
                                       double omega0, double threshold_rel) {
  if (!(threshold_rel > 0.0 && threshold_rel < 1.0)) {
    throw Error(ErrorCode::Parameter, "threshold_rel must lie in (0, 1)");
  }
  ArrivalWindow win;
  const std::size_t edge = edge_samples(f_hz, omega0, sample_rate);
  if (row.size() <= 2 * edge) return win;
  const std::size_t first = edge;
  const std::size_t last = row.size() - edge;

  double peak = 0.0;
  for (std::size_t k = first; k < last; ++k) peak = std::max(peak, std::norm(row[k]));
  if (!(peak > 0.0)) return win;

  const double level = threshold_rel * threshold_rel * peak;
  std::size_t crossing = first;
  while (crossing < last && !(std::norm(row[crossing]) > level)) ++crossing;
  if (crossing == last) return win;

  const double support = wavelet_support(f_hz, omega0) * sample_rate;
  const auto before = static_cast<std::size_t>(std::ceil(support / 2.0));
  const auto after = static_cast<std::size_t>(std::ceil(support));
  win.crossing = crossing;
  win.begin = crossing > first + before ? crossing - before : first;
  win.end = std::min(last, crossing + after + 1);
  win.valid = win.end > win.begin + 2;
  return win;
}

std::vector<ArrivalWindow> detect_first_arrival(const Scalogram& sg, double threshold_rel) {
  std::vector<ArrivalWindow> out;
  out.reserve(sg.rows());
  for (std::size_t i = 0; i < sg.rows(); ++i) {
    out.push_back(detect_first_arrival_row(sg.row(i), sg.grid().frequencies[i], sg.sample_rate(), sg.omega0(),
                                           threshold_rel));
  }
  return out;
}

namespace {

// Median |W| over the trusted region, sampled at a quarter scale since
// neighbouring coefficients are strongly correlated.
double noise_floor(std::span<const std::complex<double>> row, std::size_t first, std::size_t last, double f_hz,
                   double omega0, double sample_rate) {
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(morlet_scale(f_hz, omega0) * sample_rate / 4.0));
  std::vector<double> mags;
  mags.reserve((last - first) / stride + 1);
  for (std::size_t k = first; k < last; k += stride) mags.push_back(std::abs(row[k]));
  if (mags.empty()) return 0.0;
  auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  return *mid;
}

}  // namespace

ArrivalPoint scale_maximum_row(std::span<const std::complex<double>> row, double f_hz, const ArrivalWindow& window,
                               double sample_rate, double t0, double omega0, double min_peak_to_floor) {
  ArrivalPoint pt;
  pt.f_hz = f_hz;
  if (!window.valid || window.end > row.size() || window.end < window.begin + 3) return pt;

  std::size_t best = window.begin;
  double best_norm = -1.0;
  for (std::size_t k = window.begin; k < window.end; ++k) {
    const double v = std::norm(row[k]);
    if (v > best_norm) {
      best_norm = v;
      best = k;
    }
  }
  // A maximum on the window boundary means the peak lies outside it.
  if (best == window.begin || best + 1 == window.end) return pt;

  const double ym = std::abs(row[best - 1]);
  const double y0 = std::abs(row[best]);
  const double yp = std::abs(row[best + 1]);
  const double denom = ym - 2.0 * y0 + yp;
  double delta = 0.0;
  if (denom < 0.0) {
    delta = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
  }
  pt.t_max = t0 + (static_cast<double>(best) + delta) / sample_rate;
  pt.amplitude = y0 - 0.25 * (ym - yp) * delta;
  pt.phase = std::arg(row[best]);

  const std::size_t edge = edge_samples(f_hz, omega0, sample_rate);
  const double floor = noise_floor(row, edge, row.size() - edge, f_hz, omega0, sample_rate);
  pt.valid = pt.amplitude > 0.0 && pt.amplitude >= min_peak_to_floor * floor;
  return pt;
}

ArrivalFeature scale_maxima(const Scalogram& sg, const std::vector<ArrivalWindow>& windows, double min_peak_to_floor) {
  if (windows.size() != sg.rows()) {
    throw Error(ErrorCode::Parameter, "one arrival window per scalogram row is required");
  }
  ArrivalFeature feature;
  feature.sample_rate = sg.sample_rate();
  for (std::size_t i = 0; i < sg.rows(); ++i) {
    feature.points.push_back(scale_maximum_row(sg.row(i), sg.grid().frequencies[i], windows[i], sg.sample_rate(),
                                               sg.t0(), sg.omega0(), min_peak_to_floor));
  }
  return feature;
}

ArrivalFeature analyze_channel(const Waveform& w, const FrequencyGrid& grid, const CwtSettings& settings) {
  if (grid.frequencies.empty()) {
    throw Error(ErrorCode::Parameter, "empty frequency grid");
  }
  const CwtEngine engine(w, settings.omega0, grid.frequencies.front());
  ArrivalFeature feature;
  feature.sample_rate = w.sample_rate();
  std::vector<std::complex<double>> row;
  for (double f : grid.frequencies) {
    engine.transform(f, row);
    const ArrivalWindow win = detect_first_arrival_row(row, f, w.sample_rate(), settings.omega0, settings.threshold_rel);
    feature.points.push_back(
        scale_maximum_row(row, f, win, w.sample_rate(), w.t0(), settings.omega0, settings.min_peak_to_floor));
  }
  return feature;
}

}  // namespace twloc
