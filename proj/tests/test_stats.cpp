#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "voiceprofile/stats.hpp"

using namespace voiceprofile;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("incomplete beta closed forms") {
  for (double x : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    CHECK(regularized_incomplete_beta(1, 1, x, 1 - x) == doctest::Approx(x).epsilon(1e-14));
    CHECK(regularized_incomplete_beta(3, 1, x, 1 - x) == doctest::Approx(x * x * x).epsilon(1e-13));
    CHECK(regularized_incomplete_beta(1, 2, x, 1 - x) == doctest::Approx(1 - (1 - x) * (1 - x)).epsilon(1e-13));
  }
  for (double a : {0.5, 2.0, 7.5, 400.0}) CHECK(regularized_incomplete_beta(a, a, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK_THROWS_AS(regularized_incomplete_beta(0, 1, 0.5, 0.5), Error);
  CHECK_THROWS_AS(regularized_incomplete_beta(1, 1, 1.5, -0.5), Error);
}

TEST_CASE("student t sf against quadrature") {
  for (double df : {1.0, 10.0, 1119.0}) {
    for (double t : {0.5, 2.0, 5.99}) {
      CAPTURE(df);
      CAPTURE(t);
      CHECK(std::fabs(student_t_sf(t, df) - oracle::student_t_sf_quadrature(t, df)) < 1e-10);
      CHECK(std::fabs(student_t_sf(-t, df) - oracle::student_t_sf_quadrature(-t, df)) < 1e-10);
    }
  }
}

TEST_CASE("student t sf basic properties") {
  for (double df : {1.0, 2.0, 5.0, 30.0, 559.0}) {
    CHECK(student_t_sf(0.0, df) == 0.5);
    double prev = 1.0;
    for (double t = -8.0; t <= 8.0; t += 0.25) {
      const double s = student_t_sf(t, df);
      CHECK(s < prev);
      CHECK(std::fabs(s + student_t_sf(-t, df) - 1.0) < 1e-12);
      prev = s;
    }
  }
  for (double t = -20.0; t <= 20.0; t += 0.37) CHECK(std::fabs(student_t_sf(t, 1.0) - (0.5 - std::atan(t) / M_PI)) < 1e-12);
  CHECK(code_of([] { student_t_sf(1.0, 0.5); }) == ErrorCode::InvalidDf);
  CHECK(code_of([] { student_t_sf(1.0, 0.0); }) == ErrorCode::InvalidDf);
}

TEST_CASE("two-tailed p values reported in the significance analysis") {
  CHECK(2 * student_t_sf(5.99, 1119) == doctest::Approx(2.9e-9).epsilon(0.05));
  CHECK(2 * student_t_sf(5.33, 559) == doctest::Approx(1.42e-7).epsilon(0.05));
}

TEST_CASE("paired t test") {
  const std::vector<double> a = {3.1, 2.7, 5.0, 4.4, 1.9, 2.2};
  const std::vector<double> b = {2.0, 2.9, 3.1, 4.0, 2.5, 1.0};

  const auto same = paired_t_test(a, a);
  CHECK(same.t_statistic == 0.0);
  CHECK(same.p_value_two_tailed == 1.0);
  CHECK(same.degrees_of_freedom == 5);
  CHECK_FALSE(same.zero_variance);

  // Reference values from scipy.stats.ttest_rel.
  const auto r = paired_t_test(a, b);
  CHECK(r.t_statistic == doctest::Approx(1.651237748696121).epsilon(1e-12));
  CHECK(r.p_value_two_tailed == doctest::Approx(0.159600912078799).epsilon(1e-10));
  CHECK(r.n_pairs == 6);
  const auto small = paired_t_test(std::vector<double>{1, 2, 3, 4}, std::vector<double>{0, 0, 0, 1});
  CHECK(small.t_statistic == doctest::Approx(4.700096710803842).epsilon(1e-12));
  CHECK(small.p_value_two_tailed == doctest::Approx(0.018219854743222397).epsilon(1e-10));

  const auto swapped = paired_t_test(b, a);
  CHECK(swapped.t_statistic == doctest::Approx(-r.t_statistic).epsilon(1e-14));
  CHECK(swapped.p_value_two_tailed == doctest::Approx(r.p_value_two_tailed).epsilon(1e-14));

  std::vector<double> a2(a), b2(b);
  for (auto& v : a2) v += 17.5;
  for (auto& v : b2) v += 17.5;
  CHECK(paired_t_test(a2, b2).t_statistic == doctest::Approx(r.t_statistic).epsilon(1e-9));

  const auto flat = paired_t_test(std::vector<double>{2, 3, 4}, std::vector<double>{1, 2, 3});
  CHECK(flat.zero_variance);
  CHECK(flat.p_value_two_tailed == 0.0);
  CHECK(flat.t_statistic > 0.0);

  CHECK(code_of([] { paired_t_test(std::vector<double>{1, 2}, std::vector<double>{1}); }) == ErrorCode::LengthMismatch);
  CHECK(code_of([] { paired_t_test(std::vector<double>{1}, std::vector<double>{1}); }) == ErrorCode::TooFewPairs);
}

TEST_CASE("paired t test at a prescribed statistic") {
  // Differences 1 + c z with z standardized give t = sqrt(n) / c exactly.
  const std::size_t n = 1120;
  std::mt19937_64 rng(42);
  std::normal_distribution<double> nd;
  std::vector<double> z(n);
  for (auto& v : z) v = nd(rng);
  double mean = 0, ss = 0;
  for (double v : z) mean += v;
  mean /= n;
  for (double v : z) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1));
  const double c = std::sqrt(double(n)) / 5.99;
  std::vector<double> a(n), b(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a[i] = 1.0 + c * (z[i] - mean) / sd;

  const auto r = paired_t_test(a, b);
  CHECK(r.t_statistic == doctest::Approx(5.99).epsilon(1e-9));
  CHECK(r.degrees_of_freedom == 1119);
  CHECK(r.p_value_two_tailed == doctest::Approx(2.9e-9).epsilon(0.05));
}

TEST_CASE("ecdf examples") {
  const auto c = build_ecdf(std::vector<double>{1, 2, 3});
  CHECK(ecdf_at(c, 2.0) == doctest::Approx(2.0 / 3.0));
  CHECK(ecdf_at(c, 0.5) == 0.0);
  CHECK(ecdf_at(c, 3.0) == 1.0);
  CHECK(ecdf_at(c, 100.0) == 1.0);

  const auto ties = build_ecdf(std::vector<double>{5, 5, 5});
  CHECK(ecdf_at(ties, 4.999) == 0.0);
  CHECK(ecdf_at(ties, 5.0) == 1.0);
  CHECK(ties.sorted_values.size() == 1);
  CHECK(ties.sample_count == 3);

  CHECK(ecdf_at(build_ecdf(std::vector<double>{0}), 0.0) == 1.0);

  CHECK(code_of([] { build_ecdf(std::vector<double>{}); }) == ErrorCode::EmptyInput);
  CHECK(code_of([] { build_ecdf(std::vector<double>{1, -0.5}); }) == ErrorCode::NegativeError);
}

TEST_CASE("ecdf properties against counting") {
  std::mt19937_64 rng(77);
  std::exponential_distribution<double> ex(0.2);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> v(1 + rng() % 200);
    for (auto& x : v) x = std::round(ex(rng) * 4) / 4;  // quarter-cm grid forces ties
    const auto c = build_ecdf(v);
    CHECK(c.cumulative_probs.back() == 1.0);
    double prev = 0.0;
    for (double thr = 0.0; thr <= 60.0; thr += 0.125) {
      const double f = ecdf_at(c, thr);
      std::size_t count = 0;
      for (double x : v) count += x <= thr ? 1 : 0;
      CHECK(f == doctest::Approx(double(count) / v.size()).epsilon(1e-15));
      CHECK(f >= prev);
      CHECK(f <= 1.0);
      prev = f;
    }
    for (std::size_t i = 1; i < c.sorted_values.size(); ++i) CHECK(c.sorted_values[i] > c.sorted_values[i - 1]);
    CHECK(ecdf_at(c, *std::max_element(v.begin(), v.end())) == 1.0);
  }
}

TEST_CASE("ecdf csv") {
  const auto csv = ecdf_to_csv(build_ecdf(std::vector<double>{0.5, 2, 0.5, 4}));
  CHECK(csv == "abs_error_cm,cumulative_probability\n0.5,0.5\n2,0.75\n4,1\n");
}
