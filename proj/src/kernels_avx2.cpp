#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "voiceprofile/kernels.hpp"

namespace voiceprofile::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

}  // namespace

double dot(std::span<const float> x, std::span<const double> w) noexcept {
  const std::size_t n = x.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xf = _mm256_loadu_ps(x.data() + i);
    const __m256d x0 = _mm256_cvtps_pd(_mm256_castps256_ps128(xf));
    const __m256d x1 = _mm256_cvtps_pd(_mm256_extractf128_ps(xf, 1));
    acc0 = _mm256_fmadd_pd(x0, _mm256_loadu_pd(w.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(x1, _mm256_loadu_pd(w.data() + i + 4), acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += static_cast<double>(x[i]) * w[i];
  return acc;
}

double squared_norm(std::span<const float> x) noexcept {
  const std::size_t n = x.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xf = _mm256_loadu_ps(x.data() + i);
    const __m256d x0 = _mm256_cvtps_pd(_mm256_castps256_ps128(xf));
    const __m256d x1 = _mm256_cvtps_pd(_mm256_extractf128_ps(xf, 1));
    acc0 = _mm256_fmadd_pd(x0, x0, acc0);
    acc1 = _mm256_fmadd_pd(x1, x1, acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += static_cast<double>(x[i]) * static_cast<double>(x[i]);
  return acc;
}

ErrorSums error_sums(std::span<const double> pred, std::span<const double> truth) noexcept {
  const std::size_t n = pred.size();
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  __m256d abs_acc = _mm256_setzero_pd();
  __m256d sq_acc = _mm256_setzero_pd();
  __m256d max_acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d e = _mm256_sub_pd(_mm256_loadu_pd(pred.data() + i), _mm256_loadu_pd(truth.data() + i));
    const __m256d a = _mm256_andnot_pd(sign_mask, e);
    abs_acc = _mm256_add_pd(abs_acc, a);
    sq_acc = _mm256_fmadd_pd(e, e, sq_acc);
    max_acc = _mm256_max_pd(max_acc, a);
  }
  ErrorSums s{hsum(abs_acc), hsum(sq_acc), hmax(max_acc)};
  for (; i < n; ++i) {
    const double e = pred[i] - truth[i];
    const double a = std::fabs(e);
    s.abs_sum += a;
    s.sq_sum += e * e;
    s.max_abs = std::max(s.max_abs, a);
  }
  return s;
}

}  // namespace voiceprofile::kernels::avx2
