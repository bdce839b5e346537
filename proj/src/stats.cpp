#include "voiceprofile/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "text_util.hpp"

namespace voiceprofile {

namespace {

constexpr int kMaxCfIterations = 300;
constexpr double kCfEpsilon = 1e-15;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a, b) (modified Lentz), valid for
// x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxCfIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kCfEpsilon) return h;
  }
  spdlog::warn("incomplete beta: continued fraction did not converge (a={}, b={}, x={})", a, b, x);
  return h;
}

// lgamma(x) - [(x - 1/2) ln x - x + ln(2 pi) / 2], asymptotic series; x >= 10.
double stirling_correction(double x) {
  const double z = 1.0 / (x * x);
  return (1.0 / 12 - z * (1.0 / 360 - z * (1.0 / 1260 - z * (1.0 / 1680 - z * (1.0 / 1188 - z * (691.0 / 360360 - z / 156.0)))))) / x;
}

// log(x^a (1-x)^b / B(a, b)). Differences of lgamma lose ~|lgamma| * eps for
// large parameters, so those cases use the Stirling form instead.
double log_beta_front(double a, double b, double x, double xc) {
  constexpr double kLarge = 10.0;
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  const double lx = x > 0.5 ? std::log1p(-xc) : std::log(x);
  const double lxc = xc > 0.5 ? std::log1p(-x) : std::log(xc);
  if (a >= kLarge && b >= kLarge) {
    const double s = a + b;
    return a * std::log1p((x * b - xc * a) / a) + b * std::log1p((xc * a - x * b) / b) + 0.5 * std::log(a / s * b) -
           kHalfLog2Pi - (stirling_correction(a) + stirling_correction(b) - stirling_correction(s));
  }
  if (a >= kLarge || b >= kLarge) {
    const double big = std::max(a, b);
    const double small = std::min(a, b);
    // lgamma(big + small) - lgamma(big)
    const double ratio = (big - 0.5) * std::log1p(small / big) + small * std::log(big + small) - small +
                         stirling_correction(big + small) - stirling_correction(big);
    return ratio - std::lgamma(small) + a * lx + b * lxc;
  }
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * lx + b * lxc;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x, double xc) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::InvalidArgument, "beta parameters must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::InvalidArgument, fmt::format("x = {} outside [0, 1]", x));
  if (x == 0.0) return 0.0;
  if (xc == 0.0) return 1.0;

  const double front = std::exp(log_beta_front(a, b, x, xc));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, xc) / b;
}

double student_t_sf(double t, double df) {
  if (!(df >= 1.0) || !std::isfinite(df)) throw Error(ErrorCode::InvalidDf, fmt::format("df = {}", df));
  if (!std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "t must be finite");
  if (t == 0.0) return 0.5;
  const double t2 = t * t;
  const double x = df / (df + t2);
  const double xc = t2 / (df + t2);
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x, xc);
  return t > 0.0 ? tail : 1.0 - tail;
}

PairedTTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, fmt::format("{} vs {}", a.size(), b.size()));
  if (a.size() < 2) throw Error(ErrorCode::TooFewPairs, fmt::format("{} pairs", a.size()));

  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw Error(ErrorCode::NonFiniteInput, fmt::format("pair {}", i));
    diff[i] = a[i] - b[i];
  }

  PairedTTestResult r;
  r.n_pairs = static_cast<long>(n);
  r.degrees_of_freedom = r.n_pairs - 1;

  double sum = 0.0;
  for (double d : diff) sum += d;
  r.mean_difference = sum / static_cast<double>(n);

  const auto [lo, hi] = std::minmax_element(diff.begin(), diff.end());
  if (*lo == *hi) {
    if (*lo == 0.0) return r;  // t = 0, p = 1
    r.zero_variance = true;
    r.mean_difference = *lo;
    r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), *lo);
    r.p_value_two_tailed = 0.0;
    return r;
  }

  double ss = 0.0;
  for (double d : diff) ss += (d - r.mean_difference) * (d - r.mean_difference);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  r.t_statistic = r.mean_difference / (sd / std::sqrt(static_cast<double>(n)));
  r.p_value_two_tailed =
      std::clamp(2.0 * student_t_sf(std::fabs(r.t_statistic), static_cast<double>(r.degrees_of_freedom)), 0.0, 1.0);
  return r;
}

EcdfCurve build_ecdf(std::span<const double> abs_errors) {
  if (abs_errors.empty()) throw Error(ErrorCode::EmptyInput, "eCDF needs at least one value");
  std::vector<double> sorted(abs_errors.begin(), abs_errors.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "eCDF input");
    if (v < 0.0) throw Error(ErrorCode::NegativeError, fmt::format("{}", v));
  }
  std::sort(sorted.begin(), sorted.end());

  EcdfCurve curve;
  curve.sample_count = sorted.size();
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    // Ties collapse onto the last occurrence so the step is right-continuous.
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    curve.sorted_values.push_back(sorted[i]);
    curve.cumulative_probs.push_back(static_cast<double>(i + 1) / n);
  }
  return curve;
}

double ecdf_at(const EcdfCurve& curve, double threshold_cm) noexcept {
  const auto it = std::upper_bound(curve.sorted_values.begin(), curve.sorted_values.end(), threshold_cm);
  if (it == curve.sorted_values.begin()) return 0.0;
  return curve.cumulative_probs[static_cast<std::size_t>(it - curve.sorted_values.begin()) - 1];
}

std::string ecdf_to_csv(const EcdfCurve& curve) {
  std::string out = "abs_error_cm,cumulative_probability\n";
  for (std::size_t i = 0; i < curve.sorted_values.size(); ++i) {
    out += detail::shortest(curve.sorted_values[i]);
    out += ',';
    out += detail::shortest(curve.cumulative_probs[i]);
    out += '\n';
  }
  return out;
}

}  // namespace voiceprofile
