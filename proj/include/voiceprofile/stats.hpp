#pragma once

#include <span>
#include <string>
#include <vector>

#include "voiceprofile/error.hpp"

namespace voiceprofile {

struct PairedTTestResult {
  double t_statistic = 0.0;
  long degrees_of_freedom = 0;
  double p_value_two_tailed = 1.0;
  double mean_difference = 0.0;
  long n_pairs = 0;
  // All differences equal and nonzero: t is +-inf and p is 0.
  bool zero_variance = false;
};

/// Paired two-tailed t-test on d_i = a_i - b_i with sample (n - 1) variance.
/// Identical inputs give t = 0, p = 1.
PairedTTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b). `xc` must equal 1 - x; passing it
/// separately keeps precision when x is close to 1.
double regularized_incomplete_beta(double a, double b, double x, double xc);

/// Upper tail P(T > t) of Student's t with `df` degrees of freedom.
double student_t_sf(double t, double df);

/// Right-continuous step function over distinct sorted values.
struct EcdfCurve {
  std::vector<double> sorted_values;     // strictly increasing
  std::vector<double> cumulative_probs;  // fraction of samples <= value
  std::size_t sample_count = 0;
};

EcdfCurve build_ecdf(std::span<const double> abs_errors);

/// F(threshold) = (# samples <= threshold) / n.
double ecdf_at(const EcdfCurve& curve, double threshold_cm) noexcept;

/// "abs_error_cm,cumulative_probability" CSV, one row per distinct value.
std::string ecdf_to_csv(const EcdfCurve& curve);

}  // namespace voiceprofile
