// Acceptance suite: one PASS / FAIL / SKIP line per criterion.
//
//   acceptance <criterion>   run one criterion (exit 0 pass, 1 fail, 77 skip)
//   acceptance all           run every criterion

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/core.h>

#include "oracles.hpp"
#include "voiceprofile/dataset.hpp"
#include "voiceprofile/evaluation.hpp"
#include "voiceprofile/pipeline.hpp"
#include "voiceprofile/regression.hpp"
#include "voiceprofile/stats.hpp"

namespace fs = std::filesystem;
using namespace voiceprofile;

namespace {

enum class Status { Pass, Fail, Skip };

struct Verdict {
  Status status = Status::Pass;
  std::string detail;
};

/// Collects failed checks; the first few messages end up in the verdict.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
  }

  Verdict verdict(const std::string& summary) const {
    if (failures_ == 0) return {Status::Pass, fmt::format("{} ({} checks)", summary, checks_)};
    return {Status::Fail, fmt::format("{} of {} checks failed: {}", failures_, checks_, messages_)};
  }

 private:
  int checks_ = 0;
  int failures_ = 0;
  std::string messages_;
};

struct Criterion {
  std::string name;
  double time_limit_s;  // 0: no limit
  std::function<Verdict()> run;
};

std::string getenv_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

int shell(const std::string& cmd, std::string* output = nullptr) {
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return -1;
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int raw = pclose(pipe);
  if (output) *output = std::move(out);
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "voiceprofile_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Eigen::VectorXd predict_rows(const LinearModel& m, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict(m, Eigen::VectorXd(x.row(i).transpose()));
  return out;
}

// ---------------------------------------------------------------------------

Verdict table1_stats() {
  const fs::path path = getenv_or("HEIGHTCELEB_ANNOTATIONS", VOICEPROFILE_DATA_DIR "/heightceleb/annotations.tsv");
  if (!fs::exists(path)) {
    return {Status::Skip, fmt::format("annotation file not found at {} (set HEIGHTCELEB_ANNOTATIONS)", path.string())};
  }
  std::string out;
  const int rc = shell(fmt::format("'{}' stats --annotations '{}'", VOICEPROFILE_CLI, path.string()), &out);
  if (rc != 0) return {Status::Fail, fmt::format("stats exited {}: {}", rc, out)};

  struct Row {
    std::size_t count;
    double mean, median, std, min, max;
  };
  const std::map<std::string, Row> expected = {{"male", {690, 180.32, 180.0, 7.04, 157, 208}},
                                               {"female", {561, 166.49, 166.0, 6.99, 145, 192}}};
  Checker c;
  std::istringstream lines(out);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    std::istringstream f(line);
    std::string gender;
    Row r{};
    if (!(f >> gender >> r.count >> r.mean >> r.median >> r.std >> r.min >> r.max)) continue;
    const auto it = expected.find(gender);
    if (it == expected.end()) continue;
    ++rows;
    const Row& e = it->second;
    c.expect(r.count == e.count, fmt::format("{} count {} != {}", gender, r.count, e.count));
    for (auto [name, got, want] : {std::tuple{"mean", r.mean, e.mean}, std::tuple{"median", r.median, e.median},
                                   std::tuple{"std", r.std, e.std}, std::tuple{"min", r.min, e.min},
                                   std::tuple{"max", r.max, e.max}}) {
      c.expect(std::fabs(got - want) <= 0.01 + 1e-9, fmt::format("{} {} {} vs {}", gender, name, got, want));
    }
  }
  c.expect(rows == 2, fmt::format("found {} gender rows in stats output", rows));
  return c.verdict("counts 690/561 and Table 1 statistics within 0.01");
}

Verdict student_t() {
  Checker c;
  const double p1 = 2 * student_t_sf(5.99, 1119), p2 = 2 * student_t_sf(5.33, 559);
  c.expect(std::fabs(p1 / 2.9e-9 - 1) <= 0.05, fmt::format("p(5.99, 1119) = {}", p1));
  c.expect(std::fabs(p2 / 1.42e-7 - 1) <= 0.05, fmt::format("p(5.33, 559) = {}", p2));
  double worst = 0;
  for (double df : {1.0, 10.0, 1119.0}) {
    for (double t : {0.5, 2.0, 5.99}) {
      const double err = std::fabs(student_t_sf(t, df) - oracle::student_t_sf_quadrature(t, df));
      worst = std::max(worst, err);
      c.expect(err < 1e-10, fmt::format("sf({}, {}) off by {}", t, df, err));
    }
  }
  return c.verdict(fmt::format("p = {:.4g}, {:.4g}; max quadrature gap {:.2g}", p1, p2, worst));
}

Verdict pls_ols_equivalence() {
  Checker c;
  std::mt19937_64 rng(20240611);
  double worst = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const Eigen::MatrixXd x = oracle::random_matrix(rng, 200, 10);
    Eigen::VectorXd y = (x * oracle::random_matrix(rng, 10, 1).col(0)).array() + 170.0;
    y += oracle::random_matrix(rng, 200, 1).col(0);

    const auto ols = predict_rows(fit_ols(x, y), x);
    const auto fit = fit_pls1(x, y, 10);
    const double gap = oracle::rel_diff(predict_rows(fit.model, x), ols);
    worst = std::max(worst, gap);
    c.expect(gap < 1e-6, fmt::format("instance {}: relative gap {}", inst, gap));

    double prev = INFINITY;
    for (int k = 1; k <= 10; ++k) {
      const double rss = (y - predict_rows(fit.trace.model(k), x)).squaredNorm();
      c.expect(rss <= prev * (1 + 1e-12), fmt::format("instance {}: rss rises at k = {}", inst, k));
      prev = rss;
    }
  }
  return c.verdict(fmt::format("20 instances, max relative gap {:.2g}", worst));
}

Verdict ols_min_norm() {
  Checker c;
  std::mt19937_64 rng(7);
  double worst = 0;
  auto compare = [&](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& label) {
    const auto m = fit_ols(x, y);
    Eigen::VectorXd beta(x.cols() + 1);
    beta << m.intercept, m.coefficients;
    const Eigen::VectorXd ref = oracle::pinv_solve(x, y);
    const double coef_gap = oracle::rel_diff(beta, ref);
    const double pred_gap = oracle::rel_diff(predict_rows(m, x), oracle::with_ones(x) * ref);
    worst = std::max({worst, coef_gap, pred_gap});
    c.expect(coef_gap < 1e-8, fmt::format("{}: coefficient gap {}", label, coef_gap));
    c.expect(pred_gap < 1e-8, fmt::format("{}: prediction gap {}", label, pred_gap));
  };
  for (int inst = 0; inst < 10; ++inst) {
    const Eigen::MatrixXd x = oracle::random_matrix(rng, 200, 10);
    const Eigen::VectorXd y = (x * oracle::random_matrix(rng, 10, 1).col(0) + oracle::random_matrix(rng, 200, 1)).array() + 170.0;
    compare(x, y, fmt::format("instance {}", inst));
    if (inst % 3 == 0) {
      Eigen::MatrixXd dup(x.rows(), x.cols() + 1);
      dup << x, x.col(inst % 10);
      compare(dup, y, fmt::format("instance {} with duplicated column", inst));
    }
  }
  return c.verdict(fmt::format("full-rank and duplicated-column instances, max gap {:.2g}", worst));
}

Verdict metric_suite() {
  Checker c;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd;
  for (int set = 0; set < 100; ++set) {
    const int speakers = 4 + static_cast<int>(rng() % 20);
    const int per_speaker = 1 + static_cast<int>(rng() % 6);
    PredictionSet preds;
    std::vector<double> h;
    for (int s = 0; s < speakers; ++s) {
      const Gender g = s % 2 ? Gender::Female : Gender::Male;
      const double truth = (g == Gender::Male ? 178 : 165) + 7 * nd(rng);
      for (int u = 0; u < per_speaker; ++u) {
        preds.push_back({fmt::format("u{}_{}", s, u), fmt::format("s{}", s), g, g, truth + 5 * nd(rng), truth});
      }
    }
    for (Gender g : kGenders) {
      std::vector<double> p, t;
      for (const auto& r : preds)
        if (r.gender == g) {
          p.push_back(r.predicted_cm);
          t.push_back(r.true_cm);
        }
      const auto m = utterance_metrics(preds, g);
      const auto ref = oracle::metrics(p, t);
      c.expect(std::fabs(m.mae - ref.mae) <= 1e-12 * ref.mae, fmt::format("set {}: mae", set));
      c.expect(std::fabs(m.rmse - ref.rmse) <= 1e-12 * ref.rmse, fmt::format("set {}: rmse", set));
      c.expect(m.max_error == ref.max_error, fmt::format("set {}: max", set));
      c.expect(std::fabs(m.r_squared - ref.r_squared) <= 1e-12 * std::max(1.0, std::fabs(ref.r_squared)),
               fmt::format("set {}: r2", set));
    }
    const auto report = evaluate(preds);
    for (const auto& cell : report.cells) {
      c.expect(cell.metrics.mae <= cell.metrics.rmse && cell.metrics.rmse <= cell.metrics.max_error,
               fmt::format("set {}: metric chain broken", set));
    }

    // Constant per-gender predictions from a fitted baseline.
    PredictionSet base = preds;
    for (Gender g : kGenders) {
      std::vector<double> train;
      for (int i = 0; i < 30; ++i) train.push_back((g == Gender::Male ? 178 : 165) + 7 * nd(rng));
      const auto model = fit_baseline(train);
      for (auto& r : base)
        if (r.gender == g) r.predicted_cm = predict(model, std::vector<float>{});
    }
    for (Gender g : kGenders) {
      const auto u = utterance_metrics(base, g), s = speaker_metrics(base, g);
      const auto same = [](double a, double b) { return std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(b)); };
      c.expect(same(u.mae, s.mae) && same(u.rmse, s.rmse) && same(u.max_error, s.max_error),
               fmt::format("set {}: baseline levels differ", set));
    }
  }
  return c.verdict("100 sets against direct formulas; baseline level equality");
}

Verdict ecdf_properties() {
  Checker c;
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> ex(0.25);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> errs(1 + rng() % 500);
    for (auto& e : errs) e = std::round(ex(rng) * 2) / 2;  // half-cm grid produces ties
    const auto curve = build_ecdf(errs);
    std::size_t within = 0;
    for (double e : errs) within += e <= 2.0 ? 1 : 0;
    c.expect(ecdf_at(curve, 2.0) == static_cast<double>(within) / static_cast<double>(errs.size()),
             fmt::format("trial {}: F(2)", trial));
    double prev = 0;
    for (double thr = 0; thr <= 40; thr += 0.05) {
      const double f = ecdf_at(curve, thr);
      c.expect(f >= prev && f >= 0 && f <= 1, fmt::format("trial {}: F({}) = {}", trial, thr, f));
      prev = f;
    }
    for (double v : curve.sorted_values) {
      std::size_t le = 0;
      for (double e : errs) le += e <= v ? 1 : 0;
      const double below = ecdf_at(curve, std::nextafter(v, -1.0));
      c.expect(ecdf_at(curve, v) == static_cast<double>(le) / static_cast<double>(errs.size()),
               fmt::format("trial {}: F at tie {}", trial, v));
      c.expect(below < ecdf_at(curve, v), fmt::format("trial {}: no jump at {}", trial, v));
    }
    c.expect(ecdf_at(curve, *std::max_element(errs.begin(), errs.end())) == 1.0, "F(max) != 1");
  }
  return c.verdict("50 random tie-heavy samples");
}

Verdict determinism() {
  const fs::path fixture = VOICEPROFILE_FIXTURE_DIR;
  const auto dir = scratch("determinism");
  for (const char* run : {"a", "b"}) {
    std::string out;
    const int rc = shell(fmt::format("'{}' run --config '{}' --out '{}'", VOICEPROFILE_CLI,
                                     (fixture / "experiment.cfg").string(), (dir / run).string()),
                         &out);
    if (rc != 0) return {Status::Fail, fmt::format("run {} exited {}: {}", run, rc, out)};
  }
  Checker c;
  for (const char* f : {"report.csv", "model_male.txt", "model_female.txt"}) {
    const bool both = fs::exists(dir / "a" / f) && fs::exists(dir / "b" / f);
    c.expect(both, fmt::format("{} missing", f));
    if (both) c.expect(read_text_file(dir / "a" / f) == read_text_file(dir / "b" / f), fmt::format("{} differs", f));
  }
  return c.verdict("report.csv and model files byte-identical across two runs");
}

Verdict end_to_end() {
  // Each config must already point at extracted embeddings; the directory is
  // supplied by whoever holds the TIMIT and VoxCeleb data.
  const std::string root = getenv_or("VOICEPROFILE_E2E_DIR", "");
  if (root.empty()) return {Status::Skip, "VOICEPROFILE_E2E_DIR not set (needs TIMIT / VoxCeleb embeddings)"};

  struct Target {
    const char* config;
    Level level;
    double male, female;
  };
  const Target targets[] = {
      {"plsr_heightceleb_timit.cfg", Level::Speaker, 4.53, 4.40},
      {"hierarchical_timit.cfg", Level::Utterance, 4.81, 4.73},
      {"plsr_heightceleb_heightceleb.cfg", Level::Speaker, 3.68, 5.38},
  };
  Checker c;
  int ran = 0;
  for (const auto& t : targets) {
    const fs::path cfg_path = fs::path(root) / t.config;
    if (!fs::exists(cfg_path)) continue;
    ++ran;
    auto kv = parse_config_text(read_text_file(cfg_path));
    kv["out"] = scratch(fs::path(t.config).stem().string()).string();
    const auto result = run_experiment(config_from_map(kv, cfg_path.parent_path()));
    for (auto [g, want] : {std::pair{Gender::Male, t.male}, std::pair{Gender::Female, t.female}}) {
      const auto* cell = result.report.find(g, t.level);
      c.expect(cell && std::fabs(cell->metrics.mae - want) <= 0.3,
               fmt::format("{} {}: MAE {} vs {}", t.config, gender_name(g), cell ? cell->metrics.mae : NAN, want));
    }
  }
  if (ran == 0) return {Status::Skip, fmt::format("no end-to-end configs in {}", root)};
  return c.verdict(fmt::format("{} of 3 configurations within 0.3 cm", ran));
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {"table1_stats", 1.0, table1_stats},       {"student_t", 1.0, student_t},
      {"pls_ols_equivalence", 10.0, pls_ols_equivalence}, {"ols_min_norm", 5.0, ols_min_norm},
      {"metric_suite", 5.0, metric_suite},       {"ecdf_properties", 1.0, ecdf_properties},
      {"determinism", 0.0, determinism},         {"end_to_end", 0.0, end_to_end},
  };
  return all;
}

Status run_one(const Criterion& cr) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = cr.run();
  } catch (const std::exception& e) {
    v = {Status::Fail, fmt::format("exception: {}", e.what())};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (v.status == Status::Pass && cr.time_limit_s > 0 && secs >= cr.time_limit_s) {
    v = {Status::Fail, fmt::format("took {:.2f} s, limit {:.0f} s", secs, cr.time_limit_s)};
  }
  const char* tag = v.status == Status::Pass ? "PASS" : v.status == Status::Fail ? "FAIL" : "SKIP";
  fmt::print("{} {} [{:.3f} s] {}\n", tag, cr.name, secs, v.detail);
  std::fflush(stdout);
  return v.status;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "all";
  if (which == "all") {
    bool failed = false;
    for (const auto& cr : criteria()) failed |= run_one(cr) == Status::Fail;
    return failed ? 1 : 0;
  }
  for (const auto& cr : criteria()) {
    if (cr.name != which) continue;
    switch (run_one(cr)) {
      case Status::Pass: return 0;
      case Status::Fail: return 1;
      case Status::Skip: return 77;
    }
  }
  fmt::print(stderr, "unknown criterion '{}'; known:", which);
  for (const auto& cr : criteria()) fmt::print(stderr, " {}", cr.name);
  fmt::print(stderr, "\n");
  return 2;
}
