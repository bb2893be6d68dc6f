#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace twloc {

// Uniformly sampled real time series. Immutable after construction.
class Waveform {
 public:
  Waveform(std::vector<double> samples, double sample_rate, double t0 = 0.0);

  std::span<const double> samples() const noexcept { return samples_; }
  double sample_rate() const noexcept { return sample_rate_; }
  double t0() const noexcept { return t0_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double duration() const noexcept { return static_cast<double>(samples_.size()) / sample_rate_; }
  double time_at(double index) const noexcept { return t0_ + index / sample_rate_; }
  double operator[](std::size_t k) const noexcept { return samples_[k]; }

  std::vector<double> release() && { return std::move(samples_); }

 private:
  std::vector<double> samples_;
  double sample_rate_;
  double t0_;
};

struct LineGeometry {
  double length_m = 0.0;
  double a_over_l = 0.5;  // position of the middle device M2
  double x_over_l = 0.5;  // true event location (simulation only)

  void validate() const;
};

// gamma(f) = alpha(f) + i beta(f) with
//   alpha = k_alpha_sqrt * sqrt(f) + k_alpha_lin * f
//   beta  = 2 pi f / v_inf + k_disp * sqrt(f)
struct PropagationModel {
  double v_inf = 2.95e8;        // m/s
  double k_alpha_sqrt = 0.0;    // Np/(m sqrt(Hz))
  double k_alpha_lin = 0.0;     // Np/(m Hz)
  double k_disp = 0.0;          // rad/(m sqrt(Hz))

  void validate() const;
  bool is_dispersive() const noexcept { return k_disp != 0.0; }
};

inline constexpr double speed_of_light = 299'792'458.0;

// Shipped presets: "overhead", "cable" and "lossless".
PropagationModel model_preset(std::string_view name);

struct GammaValue {
  double alpha;  // Np/m
  double beta;   // rad/m
};

GammaValue gamma_eval(const PropagationModel& model, double f_hz);

// beta'(f) / 2pi in s/m, analytic.
double group_delay_per_meter(const PropagationModel& model, double f_hz);

enum class SourceKind { PartialDischarge, Lightning };

struct SourceParams {
  SourceKind kind = SourceKind::PartialDischarge;
  double amplitude = 1.0;
  double tau1 = 50e-9;
  double tau2 = 200e-9;
  double n = 10.0;  // Heidler steepness

  void validate() const;
};

SourceParams default_pd_source();
SourceParams default_lightning_source();
std::string_view to_string(SourceKind kind);
SourceKind source_kind_from_string(std::string_view name);

// Double-exponential partial discharge pulse, peak normalized to amplitude.
Waveform pd_waveform(const SourceParams& params, double sample_rate, double duration);

// Heidler lightning current with the standard peak correction factor eta.
Waveform heidler_waveform(const SourceParams& params, double sample_rate, double duration);
double heidler_eta(const SourceParams& params);

// Dispatches on params.kind.
Waveform source_waveform(const SourceParams& params, double sample_rate, double duration);

struct ThreePhaseFrame {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

struct ModalFrame {
  double zero = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

// Power-invariant (orthonormal) Clarke matrix; rows map (a, b, c) to
// (zero, alpha, beta). The inverse is the transpose.
const std::array<std::array<double, 3>, 3>& clarke_matrix();

ModalFrame clarke_transform(const ThreePhaseFrame& frame);
ThreePhaseFrame clarke_inverse(const ModalFrame& modes);

// Zero-sequence channel of three phase recordings sharing one time base.
Waveform zero_mode(const Waveform& phase_a, const Waveform& phase_b, const Waveform& phase_c);

}  // namespace twloc
