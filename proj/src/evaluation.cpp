#include "voiceprofile/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/core.h>

#include "text_util.hpp"
#include "voiceprofile/kernels.hpp"

namespace voiceprofile {

std::string_view level_name(Level level) noexcept { return level == Level::Utterance ? "utterance" : "speaker"; }

std::string_view aggregation_name(Aggregation a) noexcept {
  return a == Aggregation::MeanPrediction ? "mean-prediction" : "mean-abs-error";
}

std::optional<Aggregation> parse_aggregation(std::string_view s) noexcept {
  if (s == "mean-prediction") return Aggregation::MeanPrediction;
  if (s == "mean-abs-error") return Aggregation::MeanAbsError;
  return std::nullopt;
}

namespace {

double r_squared(std::span<const double> truth, double ss_res) {
  double mean = 0.0;
  for (double y : truth) mean += y;
  mean /= static_cast<double>(truth.size());
  double ss_tot = 0.0;
  for (double y : truth) ss_tot += (y - mean) * (y - mean);
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
  return 1.0 - ss_res / ss_tot;
}

}  // namespace

Metrics compute_metrics(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw Error(ErrorCode::LengthMismatch, "predictions vs truths");
  if (pred.empty()) throw Error(ErrorCode::EmptyGroup, "no rows to evaluate");
  const auto sums = kernels::error_sums(pred, truth);
  const double n = static_cast<double>(pred.size());
  Metrics m;
  m.count = pred.size();
  m.mae = sums.abs_sum / n;
  m.rmse = std::sqrt(sums.sq_sum / n);
  m.max_error = sums.max_abs;
  m.r_squared = r_squared(truth, sums.sq_sum);
  return m;
}

Metrics utterance_metrics(const PredictionSet& preds, Gender gender) {
  std::vector<double> pred, truth;
  for (const auto& r : preds) {
    if (r.gender != gender) continue;
    pred.push_back(r.predicted_cm);
    truth.push_back(r.true_cm);
  }
  if (pred.empty()) throw Error(ErrorCode::EmptyGroup, fmt::format("no {} utterances", gender_name(gender)));
  return compute_metrics(pred, truth);
}

Metrics speaker_metrics(const PredictionSet& preds, Gender gender, Aggregation aggregation) {
  struct Acc {
    double pred_sum = 0.0;
    double abs_err_sum = 0.0;
    double truth = 0.0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> speakers;
  for (const auto& r : preds) {
    if (r.gender != gender) continue;
    auto& a = speakers[r.speaker_id];
    if (a.n > 0 && a.truth != r.true_cm) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("speaker {} has inconsistent true heights", r.speaker_id));
    }
    a.truth = r.true_cm;
    a.pred_sum += r.predicted_cm;
    a.abs_err_sum += std::fabs(r.predicted_cm - r.true_cm);
    ++a.n;
  }
  if (speakers.empty()) throw Error(ErrorCode::EmptyGroup, fmt::format("no {} speakers", gender_name(gender)));

  std::vector<double> pred, truth;
  pred.reserve(speakers.size());
  truth.reserve(speakers.size());
  for (const auto& [id, a] : speakers) {
    pred.push_back(a.pred_sum / static_cast<double>(a.n));
    truth.push_back(a.truth);
  }
  Metrics m = compute_metrics(pred, truth);
  if (aggregation == Aggregation::MeanAbsError) {
    // Magnitudes only; R^2 keeps the fused-prediction definition.
    std::vector<double> mag;
    mag.reserve(speakers.size());
    for (const auto& [id, a] : speakers) mag.push_back(a.abs_err_sum / static_cast<double>(a.n));
    const std::vector<double> zeros(mag.size(), 0.0);
    const auto sums = kernels::error_sums(mag, zeros);
    const double n = static_cast<double>(mag.size());
    m.mae = sums.abs_sum / n;
    m.rmse = std::sqrt(sums.sq_sum / n);
    m.max_error = sums.max_abs;
  }
  return m;
}

double accuracy(std::span<const Gender> predicted, std::span<const Gender> truth) {
  if (predicted.size() != truth.size()) throw Error(ErrorCode::LengthMismatch, fmt::format("{} vs {}", predicted.size(), truth.size()));
  if (predicted.empty()) throw Error(ErrorCode::EmptyInput, "no labels");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

const ReportCell* EvaluationReport::find(Gender g, Level level) const noexcept {
  for (const auto& c : cells)
    if (c.gender == g && c.level == level) return &c;
  return nullptr;
}

EvaluationReport evaluate(const PredictionSet& preds, Aggregation aggregation) {
  EvaluationReport report;
  report.aggregation = aggregation;
  for (Gender g : kGenders) {
    const bool present = std::any_of(preds.begin(), preds.end(), [g](const auto& r) { return r.gender == g; });
    if (!present) continue;
    report.cells.push_back({g, Level::Utterance, utterance_metrics(preds, g)});
    report.cells.push_back({g, Level::Speaker, speaker_metrics(preds, g, aggregation)});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string cell_value(const EvaluationReport& r, Gender g, Level level, double Metrics::*field) {
  const auto* c = r.find(g, level);
  return c ? fmt::format("{:.2f}", c->metrics.*field) : std::string("-");
}

std::string cell_count(const EvaluationReport& r, Gender g, Level level) {
  const auto* c = r.find(g, level);
  return c ? fmt::format("{}", c->metrics.count) : std::string("-");
}

}  // namespace

std::string report_to_text(const EvaluationReport& report) {
  std::string out;
  out += fmt::format("{:<10} {:>8} {:>8} | {:>8} {:>8} | {:>8} {:>8} | {:>6} {:>6}\n", "", "MAE", "", "RMSE", "", "MaxErr",
                     "", "N", "");
  out += fmt::format("{:<10} {:>8} {:>8} | {:>8} {:>8} | {:>8} {:>8} | {:>6} {:>6}\n", "level", "male", "female", "male",
                     "female", "male", "female", "male", "female");
  for (Level level : {Level::Utterance, Level::Speaker}) {
    out += fmt::format("{:<10} {:>8} {:>8} | {:>8} {:>8} | {:>8} {:>8} | {:>6} {:>6}\n", level_name(level),
                       cell_value(report, Gender::Male, level, &Metrics::mae),
                       cell_value(report, Gender::Female, level, &Metrics::mae),
                       cell_value(report, Gender::Male, level, &Metrics::rmse),
                       cell_value(report, Gender::Female, level, &Metrics::rmse),
                       cell_value(report, Gender::Male, level, &Metrics::max_error),
                       cell_value(report, Gender::Female, level, &Metrics::max_error),
                       cell_count(report, Gender::Male, level), cell_count(report, Gender::Female, level));
  }
  out += fmt::format("speaker aggregation: {}\n", aggregation_name(report.aggregation));
  return out;
}

std::string report_to_csv(const EvaluationReport& report) {
  std::string out = "gender,level,count,mae_cm,rmse_cm,max_error_cm,r_squared\n";
  for (const auto& c : report.cells) {
    out += fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", gender_name(c.gender), level_name(c.level),
                       c.metrics.count, c.metrics.mae, c.metrics.rmse, c.metrics.max_error, c.metrics.r_squared);
  }
  return out;
}

std::string predictions_to_csv(const PredictionSet& preds) {
  std::string out = "utterance_id,speaker_id,gender,routed_gender,predicted_cm,true_cm\n";
  for (const auto& r : preds) {
    out += fmt::format("{},{},{},{},{},{}\n", r.utterance_id, r.speaker_id, gender_tag(r.gender),
                       gender_tag(r.routed_gender), detail::shortest(r.predicted_cm), detail::shortest(r.true_cm));
  }
  return out;
}

PredictionSet parse_predictions_csv(std::string_view text) {
  PredictionSet out;
  bool header = true;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (header) {
      header = false;
      if (line.starts_with("utterance_id")) return;
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 6) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 6 fields", line_no));
    const auto g = parse_gender(f[2]);
    const auto rg = parse_gender(f[3]);
    const auto pred = detail::parse_double(f[4]);
    const auto truth = detail::parse_double(f[5]);
    if (!g || !rg || !pred || !truth || !(*truth > 0.0)) {
      throw Error(ErrorCode::MalformedRow, fmt::format("line {}", line_no));
    }
    out.push_back({std::string(f[0]), std::string(f[1]), *g, *rg, *pred, *truth});
  });
  return out;
}

}  // namespace voiceprofile
