#include "voiceprofile/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace voiceprofile::kernels {

std::string_view isa_name(Isa isa) noexcept { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa detected_isa() noexcept {
#if defined(VOICEPROFILE_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

Isa active_isa() noexcept {
  static const Isa isa = [] {
    const char* forced = std::getenv("VOICEPROFILE_SIMD");
    if (forced != nullptr && std::string_view(forced) == "scalar") return Isa::Scalar;
    return detected_isa();
  }();
  return isa;
}

double dot(std::span<const float> x, std::span<const double> w) noexcept {
#if defined(VOICEPROFILE_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) return avx2::dot(x, w);
#endif
  return scalar::dot(x, w);
}

double squared_norm(std::span<const float> x) noexcept {
#if defined(VOICEPROFILE_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) return avx2::squared_norm(x);
#endif
  return scalar::squared_norm(x);
}

ErrorSums error_sums(std::span<const double> pred, std::span<const double> truth) noexcept {
#if defined(VOICEPROFILE_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) return avx2::error_sums(pred, truth);
#endif
  return scalar::error_sums(pred, truth);
}

}  // namespace voiceprofile::kernels
