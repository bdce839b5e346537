#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops with a scalar reference and an AVX2+FMA variant.
// The variant is picked once per process from CPUID; setting
// VOICEPROFILE_SIMD=scalar forces the reference path.

namespace voiceprofile::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa) noexcept;

/// Best ISA supported by both the build and the running CPU.
Isa detected_isa() noexcept;

/// ISA used by the dispatching entry points below.
Isa active_isa() noexcept;

/// Sums of |pred - truth|, (pred - truth)^2 and the max |pred - truth|.
struct ErrorSums {
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double max_abs = 0.0;
};

// Dispatching entry points. Spans must have equal length.
double dot(std::span<const float> x, std::span<const double> w) noexcept;
double squared_norm(std::span<const float> x) noexcept;
ErrorSums error_sums(std::span<const double> pred, std::span<const double> truth) noexcept;

namespace scalar {
double dot(std::span<const float> x, std::span<const double> w) noexcept;
double squared_norm(std::span<const float> x) noexcept;
ErrorSums error_sums(std::span<const double> pred, std::span<const double> truth) noexcept;
}  // namespace scalar

#if defined(VOICEPROFILE_HAVE_AVX2)
namespace avx2 {
double dot(std::span<const float> x, std::span<const double> w) noexcept;
double squared_norm(std::span<const float> x) noexcept;
ErrorSums error_sums(std::span<const double> pred, std::span<const double> truth) noexcept;
}  // namespace avx2
#endif

}  // namespace voiceprofile::kernels
