#include "twloc/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "twloc/error.hpp"

namespace twloc {

Waveform::Waveform(std::vector<double> samples, double sample_rate, double t0)
    : samples_(std::move(samples)), sample_rate_(sample_rate), t0_(t0) {
  if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_)) {
    throw Error(ErrorCode::Parameter, "waveform sample_rate must be positive and finite");
  }
  if (samples_.empty()) {
    throw Error(ErrorCode::Parameter, "waveform must contain at least one sample");
  }
  if (!std::isfinite(t0_)) {
    throw Error(ErrorCode::Parameter, "waveform t0 must be finite");
  }
  for (double v : samples_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::Parameter, "waveform samples must be finite");
    }
  }
}

void LineGeometry::validate() const {
  if (!(length_m > 0.0) || !std::isfinite(length_m)) {
    throw Error::validation("length_m", "line length must be positive");
  }
  if (!(a_over_l > 0.0 && a_over_l < 1.0)) {
    throw Error::validation("a_over_l", "must lie in (0, 1)");
  }
  if (!(x_over_l > 0.0 && x_over_l < 1.0)) {
    throw Error::validation("x_over_l", "must lie in (0, 1)");
  }
}

void PropagationModel::validate() const {
  if (!(v_inf > 0.0) || !std::isfinite(v_inf)) {
    throw Error::validation("v_inf", "must be positive");
  }
  if (k_alpha_sqrt < 0.0 || k_alpha_lin < 0.0) {
    throw Error::validation("k_alpha", "attenuation coefficients must be non-negative");
  }
  // beta'(f) = 2 pi / v + k_disp / (2 sqrt f) must stay positive at every f > 0.
  if (k_disp < 0.0) {
    throw Error::validation("k_disp", "must be non-negative for a monotone phase");
  }
}

PropagationModel model_preset(std::string_view name) {
  if (name == "overhead") {
    return {.v_inf = 2.95e8, .k_alpha_sqrt = 3e-9, .k_alpha_lin = 0.0, .k_disp = 2e-7};
  }
  if (name == "cable") {
    return {.v_inf = speed_of_light / std::sqrt(2.3),
            .k_alpha_sqrt = 2e-8,
            .k_alpha_lin = 0.0,
            .k_disp = 5e-7};
  }
  if (name == "lossless") {
    return {.v_inf = 2e8, .k_alpha_sqrt = 0.0, .k_alpha_lin = 0.0, .k_disp = 0.0};
  }
  throw Error(ErrorCode::Parameter, "unknown model preset '" + std::string(name) + "'");
}

GammaValue gamma_eval(const PropagationModel& model, double f_hz) {
  if (!(f_hz >= 0.0)) {
    throw Error(ErrorCode::Domain, "gamma is defined for f >= 0");
  }
  const double root = std::sqrt(f_hz);
  return {model.k_alpha_sqrt * root + model.k_alpha_lin * f_hz,
          2.0 * std::numbers::pi * f_hz / model.v_inf + model.k_disp * root};
}

double group_delay_per_meter(const PropagationModel& model, double f_hz) {
  if (!(f_hz > 0.0)) {
    throw Error(ErrorCode::Domain, "group delay is defined for f > 0");
  }
  return 1.0 / model.v_inf + model.k_disp / (4.0 * std::numbers::pi * std::sqrt(f_hz));
}

void SourceParams::validate() const {
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
    throw Error(ErrorCode::Parameter, "source amplitude must be positive");
  }
  if (!(tau1 > 0.0) || !(tau2 > 0.0)) {
    throw Error(ErrorCode::Parameter, "source time constants must be positive");
  }
  if (kind == SourceKind::PartialDischarge && !(tau1 < tau2)) {
    throw Error(ErrorCode::Parameter, "double exponential needs tau1 < tau2");
  }
  if (kind == SourceKind::Lightning && !(n >= 1.0)) {
    throw Error(ErrorCode::Parameter, "Heidler steepness n must be >= 1");
  }
}

SourceParams default_pd_source() {
  return {.kind = SourceKind::PartialDischarge, .amplitude = 1.0, .tau1 = 50e-9, .tau2 = 200e-9, .n = 1.0};
}

SourceParams default_lightning_source() {
  return {.kind = SourceKind::Lightning, .amplitude = 1.0, .tau1 = 1.8e-6, .tau2 = 95e-6, .n = 10.0};
}

std::string_view to_string(SourceKind kind) {
  return kind == SourceKind::PartialDischarge ? "pd" : "lightning";
}

SourceKind source_kind_from_string(std::string_view name) {
  if (name == "pd") return SourceKind::PartialDischarge;
  if (name == "lightning") return SourceKind::Lightning;
  throw Error(ErrorCode::Parameter, "unknown source kind '" + std::string(name) + "'");
}

namespace {

std::size_t sample_count(double sample_rate, double duration) {
  if (!(sample_rate > 0.0) || !(duration > 0.0)) {
    throw Error(ErrorCode::Parameter, "sample_rate and duration must be positive");
  }
  const double n = std::round(duration * sample_rate);
  if (n < 2.0) {
    throw Error(ErrorCode::Parameter, "duration * sample_rate must be at least 2");
  }
  return static_cast<std::size_t>(n);
}

}  // namespace

Waveform pd_waveform(const SourceParams& params, double sample_rate, double duration) {
  if (params.kind != SourceKind::PartialDischarge) {
    throw Error(ErrorCode::Parameter, "pd_waveform needs a partial discharge source");
  }
  params.validate();
  const std::size_t count = sample_count(sample_rate, duration);

  const double t1 = params.tau1;
  const double t2 = params.tau2;
  const double t_peak = t1 * t2 / (t2 - t1) * std::log(t2 / t1);
  const double gain = params.amplitude / (std::exp(-t_peak / t2) - std::exp(-t_peak / t1));

  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / sample_rate;
    out[k] = gain * (std::exp(-t / t2) - std::exp(-t / t1));
  }
  return Waveform(std::move(out), sample_rate, 0.0);
}

double heidler_eta(const SourceParams& params) {
  return std::exp(-(params.tau1 / params.tau2) * std::pow(params.n * params.tau2 / params.tau1, 1.0 / params.n));
}

Waveform heidler_waveform(const SourceParams& params, double sample_rate, double duration) {
  if (params.kind != SourceKind::Lightning) {
    throw Error(ErrorCode::Parameter, "heidler_waveform needs a lightning source");
  }
  params.validate();
  const std::size_t count = sample_count(sample_rate, duration);
  const double gain = params.amplitude / heidler_eta(params);

  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / sample_rate;
    const double r = std::pow(t / params.tau1, params.n);
    out[k] = gain * r / (1.0 + r) * std::exp(-t / params.tau2);
  }
  return Waveform(std::move(out), sample_rate, 0.0);
}

Waveform source_waveform(const SourceParams& params, double sample_rate, double duration) {
  return params.kind == SourceKind::PartialDischarge ? pd_waveform(params, sample_rate, duration)
                                                     : heidler_waveform(params, sample_rate, duration);
}

const std::array<std::array<double, 3>, 3>& clarke_matrix() {
  static const std::array<std::array<double, 3>, 3> m = [] {
    const double s3 = std::sqrt(3.0);
    const double k = std::sqrt(2.0 / 3.0);
    return std::array<std::array<double, 3>, 3>{{
        {1.0 / s3, 1.0 / s3, 1.0 / s3},
        {k, -0.5 * k, -0.5 * k},
        {0.0, k * s3 / 2.0, -k * s3 / 2.0},
    }};
  }();
  return m;
}

ModalFrame clarke_transform(const ThreePhaseFrame& frame) {
  const auto& m = clarke_matrix();
  const std::array<double, 3> v{frame.a, frame.b, frame.c};
  std::array<double, 3> r{};
  for (int i = 0; i < 3; ++i) {
    r[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
  }
  return {r[0], r[1], r[2]};
}

ThreePhaseFrame clarke_inverse(const ModalFrame& modes) {
  const auto& m = clarke_matrix();
  const std::array<double, 3> v{modes.zero, modes.alpha, modes.beta};
  std::array<double, 3> r{};
  for (int i = 0; i < 3; ++i) {
    r[i] = m[0][i] * v[0] + m[1][i] * v[1] + m[2][i] * v[2];
  }
  return {r[0], r[1], r[2]};
}

Waveform zero_mode(const Waveform& phase_a, const Waveform& phase_b, const Waveform& phase_c) {
  if (phase_a.size() != phase_b.size() || phase_a.size() != phase_c.size() ||
      phase_a.sample_rate() != phase_b.sample_rate() || phase_a.sample_rate() != phase_c.sample_rate()) {
    throw Error(ErrorCode::Parameter, "phase recordings must share length and sample rate");
  }
  std::vector<double> out(phase_a.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = clarke_transform({phase_a[k], phase_b[k], phase_c[k]}).zero;
  }
  return Waveform(std::move(out), phase_a.sample_rate(), phase_a.t0());
}

}  // namespace twloc
