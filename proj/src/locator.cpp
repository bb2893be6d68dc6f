#include "twloc/locator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "twloc/error.hpp"

namespace twloc {

namespace {

constexpr const char* kStepInput = "I. input";
constexpr const char* kStepCwt = "III-IV. wavelet maxima";
constexpr const char* kStepSide = "V. side detection";
constexpr const char* kStepEstimate = "VI. estimation";

void require_same_grid(const ArrivalFeature& a, const ArrivalFeature& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::Parameter, "arrival features must share one frequency grid");
  }
}

double wrap_phase(double p) {
  const double two_pi = 2.0 * std::numbers::pi;
  p = std::remainder(p, two_pi);
  return p <= -std::numbers::pi ? p + two_pi : p;
}

// Unwraps the valid entries of `phase` along the grid; invalid entries are skipped.
void unwrap_valid(std::vector<double>& phase, const std::vector<bool>& valid) {
  std::vector<double> compact;
  for (std::size_t i = 0; i < phase.size(); ++i) {
    if (valid[i]) compact.push_back(phase[i]);
  }
  unwrap_phase(compact);
  std::size_t j = 0;
  for (std::size_t i = 0; i < phase.size(); ++i) {
    if (valid[i]) phase[i] = compact[j++];
  }
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

std::string_view to_string(Side side) { return side == Side::LeftOfM2 ? "left" : "right"; }

SideDecision side_detect(const ArrivalFeature& m1, const ArrivalFeature& m2, const ArrivalFeature& m3, double a_over_l,
                         int quorum) {
  require_same_grid(m1, m2);
  require_same_grid(m1, m3);
  const double tol = m2.sample_rate > 0.0 ? 1.0 / m2.sample_rate : 0.0;

  SideDecision d;
  int usable = 0;
  for (std::size_t i = 0; i < m1.size(); ++i) {
    if (!(m1[i].valid && m2[i].valid && m3[i].valid)) continue;
    ++usable;
    const double d_left = m1[i].t_max - m2[i].t_max;
    const double d_right = m3[i].t_max - m2[i].t_max;
    const double margin = d_right * a_over_l - d_left * (1.0 - a_over_l);
    if (margin > tol) {
      ++d.votes_left;
    } else if (margin < -tol) {
      ++d.votes_right;
    } else {
      ++d.abstained;
    }
  }
  if (usable < quorum) {
    throw Error(ErrorCode::InsufficientData,
                std::to_string(usable) + " frequencies valid on all devices, quorum is " + std::to_string(quorum));
  }
  const int decisive = d.votes_left + d.votes_right;
  const double share = decisive > 0 ? static_cast<double>(std::max(d.votes_left, d.votes_right)) / decisive : 0.0;
  if (decisive == 0 || share <= 0.55) {
    throw Error(ErrorCode::AmbiguousSide, "side vote left " + std::to_string(d.votes_left) + " / right " +
                                              std::to_string(d.votes_right) + " / tied " + std::to_string(d.abstained));
  }
  d.side = d.votes_left > d.votes_right ? Side::LeftOfM2 : Side::RightOfM2;
  return d;
}

DeltaTimes delta_times(const ArrivalFeature& m1, const ArrivalFeature& m2, const ArrivalFeature& m3, Side side) {
  require_same_grid(m1, m2);
  require_same_grid(m1, m3);
  DeltaTimes dt;
  dt.mirrored = side == Side::RightOfM2;
  dt.sample_rate = m2.sample_rate;
  const ArrivalFeature& near_end = dt.mirrored ? m3 : m1;
  const ArrivalFeature& far_end = dt.mirrored ? m1 : m3;
  for (std::size_t i = 0; i < m1.size(); ++i) {
    DeltaTimesPoint p;
    p.f_hz = m2[i].f_hz;
    p.valid = near_end[i].valid && m2[i].valid && far_end[i].valid;
    if (p.valid) {
      p.dt31 = far_end[i].t_max - near_end[i].t_max;
      p.dt32 = far_end[i].t_max - m2[i].t_max;
      p.valid = std::isfinite(p.dt31) && std::isfinite(p.dt32);
    }
    dt.points.push_back(p);
  }
  return dt;
}

std::vector<LocationPoint> localize(const DeltaTimes& dt, double a_over_l) {
  const double a = dt.mirrored ? 1.0 - a_over_l : a_over_l;
  const double floor = dt.sample_rate > 0.0 ? 1.0 / dt.sample_rate : 0.0;
  std::vector<LocationPoint> out;
  out.reserve(dt.points.size());
  for (const auto& p : dt.points) {
    LocationPoint loc;
    loc.f_hz = p.f_hz;
    loc.valid = p.valid && std::abs(p.dt32) >= floor && p.dt32 != 0.0;
    if (loc.valid) {
      const double x = 0.5 - 0.5 * (1.0 - a) * p.dt31 / p.dt32;
      loc.raw = dt.mirrored ? 1.0 - x : x;
      loc.x_over_l = std::clamp(loc.raw, 0.0, 1.0);
    }
    out.push_back(loc);
  }
  return out;
}

void unwrap_phase(std::vector<double>& phase) {
  const double two_pi = 2.0 * std::numbers::pi;
  double offset = 0.0;
  for (std::size_t i = 1; i < phase.size(); ++i) {
    const double raw_prev = phase[i - 1] - offset;
    const double jump = phase[i] - raw_prev;
    offset += -two_pi * std::round(jump / two_pi);
    phase[i] += offset;
  }
}

CharacteristicEstimate characterize(const ArrivalFeature& middle, const ArrivalFeature& far_end, double clean_fraction) {
  require_same_grid(middle, far_end);
  if (!(clean_fraction > 0.0 && clean_fraction < 1.0)) {
    throw Error(ErrorCode::Parameter, "clean section fraction must lie in (0, 1)");
  }
  CharacteristicEstimate est;
  est.clean_fraction = clean_fraction;
  const std::size_t n = middle.size();
  std::vector<double> dphi(n, 0.0);
  std::vector<bool> ok(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    ok[i] = middle[i].valid && far_end[i].valid && middle[i].amplitude > 0.0 && far_end[i].amplitude > 0.0;
    if (ok[i]) dphi[i] = wrap_phase(middle[i].phase - far_end[i].phase);
  }
  unwrap_valid(dphi, ok);

  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    CharacteristicPoint p;
    p.f_hz = middle[i].f_hz;
    p.valid = ok[i];
    if (ok[i]) {
      const double dt32 = far_end[i].t_max - middle[i].t_max;
      p.alpha_l = std::log(middle[i].amplitude / far_end[i].amplitude) / clean_fraction;
      p.beta_prime_l = two_pi * dt32 / clean_fraction;
      p.beta_l = (dphi[i] + two_pi * dt32 * p.f_hz) / clean_fraction;
    }
    est.points.push_back(p);
  }
  return est;
}

AggregateResult aggregate(const std::vector<double>& values, const std::vector<bool>& valid, int quorum, double mad_k) {
  if (values.size() != valid.size()) {
    throw Error(ErrorCode::Parameter, "values and validity flags differ in length");
  }
  std::vector<double> pool;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (valid[i] && std::isfinite(values[i])) pool.push_back(values[i]);
  }
  if (static_cast<int>(pool.size()) < quorum || pool.empty()) {
    throw Error(ErrorCode::InsufficientData,
                std::to_string(pool.size()) + " valid estimates, quorum is " + std::to_string(quorum));
  }
  const double med = median_of(pool);
  std::vector<double> dev;
  dev.reserve(pool.size());
  for (double v : pool) dev.push_back(std::abs(v - med));
  const double scale = 1.4826 * median_of(dev);
  const double limit = std::max(mad_k * scale, 1e-12 * std::max(1.0, std::abs(med)));

  AggregateResult r;
  r.outlier.assign(values.size(), false);
  double sum = 0.0;
  std::vector<double> kept;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(valid[i] && std::isfinite(values[i]))) continue;
    if (std::abs(values[i] - med) > limit) {
      r.outlier[i] = true;
      ++r.n_outliers;
    } else {
      kept.push_back(values[i]);
      sum += values[i];
    }
  }
  r.n_valid = static_cast<int>(kept.size());
  if (r.n_valid < quorum || kept.empty()) {
    throw Error(ErrorCode::InsufficientData, "quorum not met after outlier rejection");
  }
  r.x_hat = sum / static_cast<double>(kept.size());
  double ss = 0.0;
  for (double v : kept) ss += (v - r.x_hat) * (v - r.x_hat);
  r.sigma = kept.size() > 1 ? std::sqrt(ss / static_cast<double>(kept.size() - 1)) : 0.0;
  return r;
}

BaselineResult baseline_double_terminal(double t1, double t3, double velocity, double length_m) {
  if (!(velocity > 0.0)) {
    throw Error(ErrorCode::Parameter, "baseline velocity must be positive");
  }
  BaselineResult r;
  r.x_m = 0.5 * (length_m - velocity * (t3 - t1));
  r.extrapolated = r.x_m < 0.0 || r.x_m > length_m;
  return r;
}

void AnalysisParams::validate() const {
  if (!(f_min > 0.0) || !(f_max > f_min)) throw Error::validation("f_min", "band must satisfy 0 < f_min < f_max");
  if (voices < 1) throw Error::validation("voices", "must be >= 1");
  if (!(cwt.omega0 >= 5.0)) throw Error::validation("omega0", "must be >= 5");
  if (!(cwt.threshold_rel > 0.0 && cwt.threshold_rel < 1.0)) throw Error::validation("threshold_rel", "must lie in (0, 1)");
  if (!(cwt.min_peak_to_floor >= 0.0)) throw Error::validation("min_peak_to_floor", "must be non-negative");
  if (quorum < 1) throw Error::validation("quorum", "must be >= 1");
  if (!(mad_k > 0.0)) throw Error::validation("mad_k", "must be positive");
}

namespace {

std::optional<double> aggregate_optional(const std::vector<LocationPoint>& pts, const AnalysisParams& params) {
  std::vector<double> v;
  std::vector<bool> ok;
  for (const auto& p : pts) {
    v.push_back(p.raw);
    ok.push_back(p.valid);
  }
  try {
    return std::clamp(aggregate(v, ok, params.quorum, params.mad_k).x_hat, 0.0, 1.0);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Location from amplitude decay: (l - 2x)/(l - a) = ln(A1/A3) / ln(A2/A3).
std::vector<LocationPoint> locate_by_amplitude(const ArrivalFeature& near_end, const ArrivalFeature& middle,
                                               const ArrivalFeature& far_end, double a, bool mirrored) {
  std::vector<LocationPoint> out;
  for (std::size_t i = 0; i < middle.size(); ++i) {
    LocationPoint p;
    p.f_hz = middle[i].f_hz;
    if (near_end[i].valid && middle[i].valid && far_end[i].valid && far_end[i].amplitude > 0.0) {
      const double event = std::log(near_end[i].amplitude / far_end[i].amplitude);
      const double clean = std::log(middle[i].amplitude / far_end[i].amplitude);
      if (std::abs(clean) > 1e-9) {
        const double x = 0.5 - 0.5 * (1.0 - a) * event / clean;
        p.raw = mirrored ? 1.0 - x : x;
        p.x_over_l = std::clamp(p.raw, 0.0, 1.0);
        p.valid = std::isfinite(p.raw);
      }
    }
    out.push_back(p);
  }
  return out;
}

// Location from total phase rotation beta * distance on both sections.
std::vector<LocationPoint> locate_by_phase(const ArrivalFeature& near_end, const ArrivalFeature& middle,
                                           const ArrivalFeature& far_end, double a, bool mirrored) {
  const std::size_t n = middle.size();
  std::vector<double> d31(n, 0.0);
  std::vector<double> d32(n, 0.0);
  std::vector<bool> ok(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    ok[i] = near_end[i].valid && middle[i].valid && far_end[i].valid;
    if (ok[i]) {
      d31[i] = wrap_phase(near_end[i].phase - far_end[i].phase);
      d32[i] = wrap_phase(middle[i].phase - far_end[i].phase);
    }
  }
  unwrap_valid(d31, ok);
  unwrap_valid(d32, ok);
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<LocationPoint> out;
  for (std::size_t i = 0; i < n; ++i) {
    LocationPoint p;
    p.f_hz = middle[i].f_hz;
    if (ok[i]) {
      const double f = middle[i].f_hz;
      const double event = d31[i] + two_pi * f * (far_end[i].t_max - near_end[i].t_max);
      const double clean = d32[i] + two_pi * f * (far_end[i].t_max - middle[i].t_max);
      if (std::abs(clean) > 1e-9) {
        const double x = 0.5 - 0.5 * (1.0 - a) * event / clean;
        p.raw = mirrored ? 1.0 - x : x;
        p.x_over_l = std::clamp(p.raw, 0.0, 1.0);
        p.valid = std::isfinite(p.raw);
      }
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace

LocalizationReport locate_from_features(std::array<ArrivalFeature, 3> features, double a_over_l,
                                        const AnalysisParams& params) {
  if (!(a_over_l > 0.0 && a_over_l < 1.0)) {
    throw Error(ErrorCode::Parameter, "a/l must lie in (0, 1)", kStepInput);
  }
  LocalizationReport rep;
  rep.a_over_l = a_over_l;
  for (const auto& p : features[1].points) rep.frequencies.push_back(p.f_hz);

  try {
    rep.side_votes = side_detect(features[0], features[1], features[2], a_over_l, params.quorum);
  } catch (const Error& e) {
    throw e.with_step(kStepSide);
  }
  rep.side = rep.side_votes.side;

  try {
    rep.delta = delta_times(features[0], features[1], features[2], rep.side);
    rep.per_frequency = localize(rep.delta, a_over_l);

    const bool mirrored = rep.delta.mirrored;
    const ArrivalFeature& near_end = mirrored ? features[2] : features[0];
    const ArrivalFeature& far_end = mirrored ? features[0] : features[2];
    const double a = mirrored ? 1.0 - a_over_l : a_over_l;
    rep.characteristic = characterize(features[1], far_end, 1.0 - a);

    std::vector<double> raw;
    std::vector<bool> ok;
    for (const auto& p : rep.per_frequency) {
      raw.push_back(p.raw);
      ok.push_back(p.valid);
    }
    const AggregateResult agg = aggregate(raw, ok, params.quorum, params.mad_k);
    rep.x_over_l = std::clamp(agg.x_hat, 0.0, 1.0);
    rep.sigma = agg.sigma;
    rep.n_valid = agg.n_valid;
    rep.n_outliers = agg.n_outliers;
    rep.outlier = agg.outlier;

    rep.by_amplitude = locate_by_amplitude(near_end, features[1], far_end, a, mirrored);
    rep.by_phase = locate_by_phase(near_end, features[1], far_end, a, mirrored);
    rep.x_over_l_amplitude = aggregate_optional(rep.by_amplitude, params);
    rep.x_over_l_phase = aggregate_optional(rep.by_phase, params);
  } catch (const Error& e) {
    throw e.with_step(kStepEstimate);
  }
  rep.features = std::move(features);
  return rep;
}

LocalizationReport run_localization(const MeasurementSet& ms, const AnalysisParams& params) {
  try {
    params.validate();
  } catch (const Error& e) {
    throw e.with_step(kStepInput);
  }
  const double fs = ms.waveforms[0].sample_rate();
  for (const auto& w : ms.waveforms) {
    if (w.sample_rate() != fs || w.size() != ms.waveforms[0].size()) {
      throw Error(ErrorCode::Parameter, "all three waveforms must share sample rate and length", kStepInput);
    }
  }

  std::array<ArrivalFeature, 3> features;
  try {
    const FrequencyGrid grid = central_frequencies(params.f_min, params.f_max, params.voices, fs);
    for (int i = 0; i < 3; ++i) {
      features[i] = analyze_channel(ms.waveforms[i], grid, params.cwt);
    }
  } catch (const Error& e) {
    throw e.with_step(kStepCwt);
  }
  LocalizationReport rep = locate_from_features(std::move(features), ms.a_over_l, params);
  rep.line_length_m = ms.line_length_m;
  return rep;
}

std::optional<double> baseline_frequency(const LocalizationReport& report) {
  const auto& m1 = report.features[0].points;
  const auto& m3 = report.features[2].points;
  for (std::size_t i = m1.size(); i-- > 0;) {
    if (m1[i].valid && m3[i].valid) return m1[i].f_hz;
  }
  return std::nullopt;
}

BaselineResult baseline_from_report(const LocalizationReport& report, double velocity, double length_m) {
  const auto& m1 = report.features[0].points;
  const auto& m3 = report.features[2].points;
  for (std::size_t i = m1.size(); i-- > 0;) {
    if (m1[i].valid && m3[i].valid) {
      return baseline_double_terminal(m1[i].t_max, m3[i].t_max, velocity, length_m);
    }
  }
  throw Error(ErrorCode::InsufficientData, "no frequency valid on both M1 and M3 for the baseline");
}

}  // namespace twloc
