#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "twloc/error.hpp"
#include "twloc/model.hpp"

using namespace twloc;
using doctest::Approx;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected twloc::Error");
  return ErrorCode::Parameter;
}

}  // namespace

TEST_CASE("waveform rejects bad construction") {
  CHECK(code_of([] { Waveform({}, 1.0); }) == ErrorCode::Parameter);
  CHECK(code_of([] { Waveform({1.0}, 0.0); }) == ErrorCode::Parameter);
  CHECK(code_of([] { Waveform({1.0, NAN}, 1.0); }) == ErrorCode::Parameter);
  const Waveform w({1.0, 2.0, 3.0}, 10.0, 0.5);
  CHECK(w.size() == 3);
  CHECK(w.time_at(2.0) == Approx(0.7));
}

TEST_CASE("pd waveform") {
  const SourceParams p = default_pd_source();
  const double fs = 10e9;
  const Waveform w = pd_waveform(p, fs, 2e-6);
  CHECK(w[0] == 0.0);

  // peak at tau1 tau2 / (tau2 - tau1) ln(tau2 / tau1), checked by a dense scan
  const double t_star = 50e-9 * 200e-9 / 150e-9 * std::log(4.0);
  CHECK(t_star == Approx(92.42e-9).epsilon(1e-3));
  std::size_t k_max = 0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] > w[k_max]) k_max = k;
  }
  CHECK(std::abs(static_cast<double>(k_max) / fs - t_star) <= 1.0 / fs);
  CHECK(w[k_max] == Approx(1.0).epsilon(1e-6));
  CHECK(w[w.size() - 1] < 1e-3);

  SourceParams p2 = p;
  p2.amplitude = 2.0;
  const Waveform w2 = pd_waveform(p2, fs, 2e-6);
  for (std::size_t k = 0; k < w.size(); k += 97) CHECK(w2[k] == 2.0 * w[k]);

  SourceParams bad = p;
  bad.tau1 = bad.tau2;
  CHECK(code_of([&] { pd_waveform(bad, fs, 1e-6); }) == ErrorCode::Parameter);
  CHECK(code_of([&] { pd_waveform(p, fs, 1.0 / fs); }) == ErrorCode::Parameter);
}

TEST_CASE("heidler waveform") {
  const SourceParams p = default_lightning_source();
  const Waveform w = heidler_waveform(p, 100e6, 1e-3);
  CHECK(w[0] == 0.0);
  double peak = 0.0;
  for (double v : w.samples()) {
    CHECK(std::isfinite(v));
    peak = std::max(peak, v);
  }
  CHECK(peak == Approx(1.0).epsilon(0.01));
  CHECK(w[w.size() - 1] < 1e-3);  // e^(-1ms / 95us) ~ 3e-5

  SourceParams bad = p;
  bad.tau1 = -1.0;
  CHECK(code_of([&] { heidler_waveform(bad, 100e6, 1e-3); }) == ErrorCode::Parameter);
  bad = p;
  bad.n = 0.5;
  CHECK(code_of([&] { heidler_waveform(bad, 100e6, 1e-3); }) == ErrorCode::Parameter);
  CHECK(code_of([&] { pd_waveform(p, 100e6, 1e-3); }) == ErrorCode::Parameter);
}

TEST_CASE("gamma_eval") {
  const PropagationModel lossless = model_preset("lossless");
  const GammaValue g = gamma_eval(lossless, 1e6);
  CHECK(g.alpha == 0.0);
  CHECK(g.beta == Approx(0.0314159).epsilon(1e-5));

  const GammaValue g0 = gamma_eval(model_preset("cable"), 0.0);
  CHECK(g0.alpha == 0.0);
  CHECK(g0.beta == 0.0);

  const PropagationModel cable = model_preset("cable");
  CHECK(cable.v_inf == Approx(1.977e8).epsilon(1e-3));
  CHECK(gamma_eval(cable, 1e6).beta == Approx(2.0 * std::numbers::pi * 1e6 / cable.v_inf + cable.k_disp * 1e3));

  CHECK(code_of([&] { gamma_eval(cable, -1.0); }) == ErrorCode::Domain);
}

TEST_CASE("group delay") {
  const PropagationModel lossless = model_preset("lossless");
  for (double f : {1e3, 1e5, 1e6, 3e7}) CHECK(group_delay_per_meter(lossless, f) == Approx(1.0 / lossless.v_inf));

  CHECK(code_of([&] { group_delay_per_meter(lossless, 0.0); }) == ErrorCode::Domain);

  // analytic vs central difference, h = f * 1e-4, on >= 100 log-spaced points, every preset
  for (const char* name : {"overhead", "cable", "lossless"}) {
    const PropagationModel m = model_preset(name);
    double previous = INFINITY;
    for (int i = 0; i <= 120; ++i) {
      const double f = 1e5 * std::pow(10.0, i / 120.0);
      const double h = f * 1e-4;
      const double numeric = (gamma_eval(m, f + h).beta - gamma_eval(m, f - h).beta) / (2.0 * h) / (2.0 * std::numbers::pi);
      const double analytic = group_delay_per_meter(m, f);
      CHECK(analytic > 0.0);
      CHECK(std::abs(analytic - numeric) <= 1e-6 * analytic);
      if (m.is_dispersive()) {
        CHECK(analytic < previous);
        previous = analytic;
      }
    }
  }
}

TEST_CASE("model validation names the field") {
  PropagationModel m = model_preset("overhead");
  m.v_inf = 0.0;
  try {
    m.validate();
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Validation);
    CHECK(e.field() == "v_inf");
  }
  CHECK(code_of([] { model_preset("nope"); }) == ErrorCode::Parameter);
  LineGeometry g{1000.0, 0.5, 1.0};
  CHECK(code_of([&] { g.validate(); }) == ErrorCode::Validation);
}

TEST_CASE("clarke transform") {
  const ModalFrame balanced = clarke_transform({1.0, 1.0, 1.0});
  CHECK(balanced.zero == Approx(1.7320508).epsilon(1e-7));
  CHECK(std::abs(balanced.alpha) < 1e-15);
  CHECK(std::abs(balanced.beta) < 1e-15);

  const ModalFrame zero = clarke_transform({0.0, 0.0, 0.0});
  CHECK(zero.zero == 0.0);
  CHECK(zero.alpha == 0.0);
  CHECK(zero.beta == 0.0);

  const ModalFrame c = clarke_transform({0.0, 0.0, 1.0});
  CHECK(c.zero == Approx(1.0 / std::sqrt(3.0)));
  CHECK(c.alpha == Approx(-1.0 / std::sqrt(6.0)));
  CHECK(c.beta == Approx(-1.0 / std::sqrt(2.0)));

  const ThreePhaseFrame back = clarke_inverse({std::sqrt(3.0), 0.0, 0.0});
  CHECK(back.a == Approx(1.0));
  CHECK(back.b == Approx(1.0));
  CHECK(back.c == Approx(1.0));
  const ThreePhaseFrame origin = clarke_inverse({0.0, 0.0, 0.0});
  CHECK(origin.a == 0.0);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const ThreePhaseFrame x{u(rng), u(rng), u(rng)};
    const ThreePhaseFrame y = clarke_inverse(clarke_transform(x));
    const double scale = std::max({std::abs(x.a), std::abs(x.b), std::abs(x.c)});
    CHECK(std::abs(y.a - x.a) <= 1e-12 * scale);
    CHECK(std::abs(y.b - x.b) <= 1e-12 * scale);
    CHECK(std::abs(y.c - x.c) <= 1e-12 * scale);
  }

  const auto& m = clarke_matrix();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += m[i][k] * m[j][k];
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("zero mode of a balanced recording") {
  const Waveform a({1.0, 2.0, -1.0}, 1e6);
  const Waveform z = zero_mode(a, a, a);
  for (std::size_t k = 0; k < 3; ++k) CHECK(z[k] == Approx(std::sqrt(3.0) * a[k]));
  const Waveform short_w({1.0}, 1e6);
  CHECK(code_of([&] { zero_mode(a, a, short_w); }) == ErrorCode::Parameter);
}
