#include <algorithm>
#include <cmath>

#include "voiceprofile/kernels.hpp"

namespace voiceprofile::kernels::scalar {

double dot(std::span<const float> x, std::span<const double> w) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x[i]) * w[i];
  return acc;
}

double squared_norm(std::span<const float> x) noexcept {
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * static_cast<double>(v);
  return acc;
}

ErrorSums error_sums(std::span<const double> pred, std::span<const double> truth) noexcept {
  ErrorSums s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    const double a = std::fabs(e);
    s.abs_sum += a;
    s.sq_sum += e * e;
    s.max_abs = std::max(s.max_abs, a);
  }
  return s;
}

}  // namespace voiceprofile::kernels::scalar
