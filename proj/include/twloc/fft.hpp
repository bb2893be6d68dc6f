#pragma once

#include <complex>
#include <cstddef>
#include <new>
#include <span>
#include <vector>

namespace twloc::fft {

// Allocator returning SIMD-aligned memory so cached FFTW plans can be
// executed on any buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n);
  void deallocate(T* p, std::size_t) noexcept;

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

void* aligned_alloc_bytes(std::size_t bytes);
void aligned_free(void* p) noexcept;

template <typename T>
T* AlignedAllocator<T>::allocate(std::size_t n) {
  void* p = aligned_alloc_bytes(n * sizeof(T));
  if (p == nullptr) throw std::bad_alloc();
  return static_cast<T*>(p);
}

template <typename T>
void AlignedAllocator<T>::deallocate(T* p, std::size_t) noexcept {
  aligned_free(p);
}

using cplx = std::complex<double>;
using ComplexVector = std::vector<cplx, AlignedAllocator<cplx>>;
using RealVector = std::vector<double, AlignedAllocator<double>>;

// Smallest n' >= n whose only prime factors are 2, 3 and 5.
std::size_t good_size(std::size_t n);

// Real input zero-padded to `length`; returns bins 0..length/2.
ComplexVector forward_real(std::span<const double> input, std::size_t length);

// Inverse of forward_real (normalized by 1/length). `half_spectrum` holds
// length/2 + 1 bins and is consumed.
RealVector inverse_real(ComplexVector half_spectrum, std::size_t length);

// Unnormalized in-place complex transforms.
void forward_complex(ComplexVector& data);
// Includes the 1/N normalization.
void inverse_complex(ComplexVector& data);

}  // namespace twloc::fft
