#include "twloc/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "twloc/error.hpp"

namespace twloc::fft {

void* aligned_alloc_bytes(std::size_t bytes) { return fftw_malloc(bytes == 0 ? 1 : bytes); }
void aligned_free(void* p) noexcept { fftw_free(p); }

std::size_t good_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

namespace {

enum class PlanKind { R2C, C2R, Forward, Backward };

// FFTW planning is not thread safe; execution of an existing plan on new
// arrays is. ESTIMATE plans are deterministic, which keeps results
// bit-reproducible across runs.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(PlanKind kind, std::size_t n) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(kind, n);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    const int len = static_cast<int>(n);
    fftw_plan plan = nullptr;
    switch (kind) {
      case PlanKind::R2C: {
        RealVector in(n);
        ComplexVector out(n / 2 + 1);
        plan = fftw_plan_dft_r2c_1d(len, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
        break;
      }
      case PlanKind::C2R: {
        ComplexVector in(n / 2 + 1);
        RealVector out(n);
        plan = fftw_plan_dft_c2r_1d(len, reinterpret_cast<fftw_complex*>(in.data()), out.data(), FFTW_ESTIMATE);
        break;
      }
      case PlanKind::Forward:
      case PlanKind::Backward: {
        ComplexVector buf(n);
        auto* p = reinterpret_cast<fftw_complex*>(buf.data());
        plan = fftw_plan_dft_1d(len, p, p, kind == PlanKind::Forward ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
        break;
      }
    }
    if (plan == nullptr) {
      throw Error(ErrorCode::Parameter, "FFTW failed to create a plan");
    }
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<PlanKind, std::size_t>, fftw_plan> plans_;
};

}  // namespace

ComplexVector forward_real(std::span<const double> input, std::size_t length) {
  if (length < input.size()) {
    throw Error(ErrorCode::Parameter, "FFT length shorter than input");
  }
  RealVector padded(length, 0.0);
  std::copy(input.begin(), input.end(), padded.begin());
  ComplexVector out(length / 2 + 1);
  fftw_execute_dft_r2c(PlanCache::instance().get(PlanKind::R2C, length), padded.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

RealVector inverse_real(ComplexVector half_spectrum, std::size_t length) {
  if (half_spectrum.size() != length / 2 + 1) {
    throw Error(ErrorCode::Parameter, "half spectrum size does not match FFT length");
  }
  RealVector out(length);
  fftw_execute_dft_c2r(PlanCache::instance().get(PlanKind::C2R, length),
                       reinterpret_cast<fftw_complex*>(half_spectrum.data()), out.data());
  const double scale = 1.0 / static_cast<double>(length);
  for (double& v : out) v *= scale;
  return out;
}

void forward_complex(ComplexVector& data) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(PlanCache::instance().get(PlanKind::Forward, data.size()), p, p);
}

void inverse_complex(ComplexVector& data) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(PlanCache::instance().get(PlanKind::Backward, data.size()), p, p);
  const double scale = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v *= scale;
}

}  // namespace twloc::fft
