#include "twloc/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "twloc/error.hpp"

namespace twloc {

void ScenarioConfig::validate() const {
  geometry.validate();
  model.validate();
  try {
    source.validate();
  } catch (const Error& e) {
    throw Error::validation("source", e.what());
  }
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
    throw Error::validation("sample_rate", "must be positive");
  }
  if (!(sample_rate >= 2.0 * analysis_f_max)) {
    throw Error::validation("sample_rate", "must be at least twice the highest analysis frequency");
  }
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw Error::validation("duration", "must be positive");
  }
  const int bounces = reflections ? reflections->max_bounces : 0;
  const double one_way = geometry.length_m / model.v_inf;
  if (duration < one_way * (1.0 + bounces)) {
    throw Error::validation("duration", "shorter than the one-way travel time times (1 + max_bounces)");
  }
  if (snr_db && (std::isnan(*snr_db) || (std::isinf(*snr_db) && *snr_db < 0.0))) {
    throw Error::validation("snr_db", "must be finite or +inf");
  }
  for (double offset : desync_offsets) {
    if (!std::isfinite(offset) || std::abs(offset) >= duration / 10.0) {
      throw Error::validation("desync_offsets", "each offset must satisfy |offset| < duration / 10");
    }
  }
  if (reflections) {
    if (std::abs(reflections->rho_left) > 1.0) throw Error::validation("rho_left", "must lie in [-1, 1]");
    if (std::abs(reflections->rho_right) > 1.0) throw Error::validation("rho_right", "must lie in [-1, 1]");
    if (reflections->max_bounces < 0) throw Error::validation("max_bounces", "must be non-negative");
  }
}

double ScenarioConfig::launch_time() const {
  const auto count = static_cast<std::size_t>(std::round(duration * sample_rate));
  return static_cast<double>(count / 4) / sample_rate;
}

Propagator::Propagator(const Waveform& source, const PropagationModel& model)
    : model_(model),
      size_(source.size()),
      sample_rate_(source.sample_rate()),
      t0_(source.t0()),
      fft_length_(fft::good_size(2 * source.size())) {
  model_.validate();
  spectrum_ = fft::forward_real(source.samples(), fft_length_);
  const auto s = source.samples();
  const auto peak = std::max_element(s.begin(), s.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
  peak_time_ = source.time_at(static_cast<double>(peak - s.begin()));
}

double Propagator::arrival_time(double distance_m) const { return peak_time_ + distance_m / model_.v_inf; }

fft::ComplexVector Propagator::transfer_function(double distance_m) const {
  const std::size_t bins = fft_length_ / 2 + 1;
  fft::ComplexVector h(bins);
  const double df = sample_rate_ / static_cast<double>(fft_length_);
  for (std::size_t k = 0; k < bins; ++k) {
    const GammaValue g = gamma_eval(model_, df * static_cast<double>(k));
    h[k] = std::exp(fft::cplx(-distance_m * g.alpha, -distance_m * g.beta));
  }
  if (fft_length_ % 2 == 0) {
    h[bins - 1] = h[bins - 1].real();
  }
  return h;
}

std::vector<double> Propagator::samples_at(double distance_m) const {
  if (!(distance_m >= 0.0) || !std::isfinite(distance_m)) {
    throw Error(ErrorCode::Parameter, "propagation distance must be non-negative");
  }
  fft::ComplexVector spec = spectrum_;
  if (distance_m > 0.0) {
    const fft::ComplexVector h = transfer_function(distance_m);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= h[k];
  }
  const fft::RealVector full = fft::inverse_real(std::move(spec), fft_length_);
  return std::vector<double>(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(size_));
}

Waveform propagate(const Waveform& source, const PropagationModel& model, double distance_m) {
  if (distance_m == 0.0) return source;
  Propagator prop(source, model);
  const double window_end = source.time_at(static_cast<double>(source.size()));
  if (prop.arrival_time(distance_m) >= window_end) {
    throw Error(ErrorCode::WindowOverflow, "propagated pulse would leave the time window");
  }
  return Waveform(prop.samples_at(distance_m), source.sample_rate(), source.t0());
}

namespace {

struct Path {
  double distance;
  double coefficient;
  bool direct;
};

// Lattice paths from the event at x to a device at p on [0, l]. Bounce k of a
// wave that first heads toward end `start` reaches p after the listed distance.
std::vector<Path> lattice_paths(double x, double p, double l, const std::optional<ReflectionConfig>& refl) {
  std::vector<Path> paths{{std::abs(x - p), 1.0, true}};
  if (!refl) return paths;
  for (int start = 0; start < 2; ++start) {
    const bool left_first = start == 0;
    double coef = 1.0;
    for (int k = 1; k <= refl->max_bounces; ++k) {
      const bool at_left = left_first ? (k % 2 == 1) : (k % 2 == 0);
      coef *= at_left ? refl->rho_left : refl->rho_right;
      const double to_first_end = left_first ? x : l - x;
      // After bounce k the wave travels away from the end it just hit.
      const double to_device = at_left ? p : l - p;
      paths.push_back({to_first_end + (k - 1) * l + to_device, coef, false});
    }
  }
  return paths;
}

}  // namespace

MeasurementSet synthesize_clean(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto count = static_cast<std::size_t>(std::round(cfg.duration * cfg.sample_rate));
  const std::size_t launch = count / 4;

  const Waveform pulse = source_waveform(cfg.source, cfg.sample_rate, static_cast<double>(count - launch) / cfg.sample_rate);
  std::vector<double> launched(count, 0.0);
  std::copy_n(pulse.samples().begin(), std::min(pulse.size(), count - launch), launched.begin() + static_cast<std::ptrdiff_t>(launch));
  const Waveform source(std::move(launched), cfg.sample_rate, 0.0);

  const Propagator prop(source, cfg.model);
  const double l = cfg.geometry.length_m;
  const double x = cfg.geometry.x_over_l * l;
  const std::array<double, 3> positions{0.0, cfg.geometry.a_over_l * l, l};
  const double window_end = source.time_at(static_cast<double>(count));

  std::vector<Waveform> out;
  for (double p : positions) {
    std::vector<double> acc(count, 0.0);
    for (const Path& path : lattice_paths(x, p, l, cfg.reflections)) {
      if (path.coefficient == 0.0) continue;
      if (prop.arrival_time(path.distance) >= window_end) {
        if (path.direct) {
          throw Error(ErrorCode::WindowOverflow, "incident wave would arrive after the end of the window");
        }
        continue;
      }
      const std::vector<double> s = prop.samples_at(path.distance);
      for (std::size_t k = 0; k < count; ++k) acc[k] += path.coefficient * s[k];
    }
    out.emplace_back(std::move(acc), cfg.sample_rate, 0.0);
  }

  return MeasurementSet{{out[0], out[1], out[2]},
                        cfg.geometry.a_over_l,
                        cfg.geometry.length_m,
                        ScenarioTruth{cfg.geometry.x_over_l, cfg.model}};
}

MeasurementSet synthesize_measurements(const ScenarioConfig& cfg) {
  MeasurementSet ms = synthesize_clean(cfg);
  if (cfg.snr_db) {
    for (int i = 0; i < 3; ++i) {
      ms.waveforms[i] = add_awgn(ms.waveforms[i], *cfg.snr_db, cfg.source.amplitude, device_seed(cfg.noise_seed, i));
    }
  }
  return apply_desync(ms, cfg.desync_offsets);
}

Waveform add_awgn(const Waveform& w, double snr_db, double peak_ref, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0.0) return w;
  if (!std::isfinite(snr_db)) {
    throw Error(ErrorCode::Parameter, "snr_db must be finite or +inf");
  }
  if (!(peak_ref > 0.0)) {
    throw Error(ErrorCode::Parameter, "noise reference peak must be positive");
  }
  const double sigma = peak_ref * std::pow(10.0, -snr_db / 20.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<double> out(w.samples().begin(), w.samples().end());
  for (double& v : out) v += noise(rng);
  return Waveform(std::move(out), w.sample_rate(), w.t0());
}

std::uint64_t device_seed(std::uint64_t scenario_seed, int device) {
  // splitmix64 finalizer over (seed, device)
  std::uint64_t z = scenario_seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(device + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Waveform shift_samples(const Waveform& w, long long shift) {
  const auto n = static_cast<long long>(w.size());
  const auto s = w.samples();
  std::vector<double> out(w.size());
  for (long long k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(((k + shift) % n + n) % n)] = s[static_cast<std::size_t>(k)];
  }
  return Waveform(std::move(out), w.sample_rate(), w.t0());
}

MeasurementSet apply_desync(const MeasurementSet& ms, const std::array<double, 3>& offsets) {
  MeasurementSet out = ms;
  for (int i = 0; i < 3; ++i) {
    const Waveform& w = ms.waveforms[i];
    if (!std::isfinite(offsets[i]) || std::abs(offsets[i]) >= w.duration() / 10.0) {
      throw Error(ErrorCode::Parameter, "desync offset must satisfy |offset| < duration / 10");
    }
    const auto shift = static_cast<long long>(std::llround(offsets[i] * w.sample_rate()));
    if (shift != 0) out.waveforms[i] = shift_samples(w, shift);
  }
  return out;
}

}  // namespace twloc
