#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voiceprofile/dataset.hpp"

namespace voiceprofile {

struct PredictionRow {
  std::string utterance_id;
  std::string speaker_id;
  Gender gender = Gender::Male;         // ground truth; metrics group on this
  Gender routed_gender = Gender::Male;  // regressor that produced the prediction
  double predicted_cm = 0.0;
  double true_cm = 0.0;
};

using PredictionSet = std::vector<PredictionRow>;

enum class Level { Utterance, Speaker };

std::string_view level_name(Level level) noexcept;

/// How utterances of one speaker are fused at speaker level.
enum class Aggregation {
  MeanPrediction,  // average the predictions, then take one error
  MeanAbsError,    // average the per-utterance absolute errors
};

std::string_view aggregation_name(Aggregation a) noexcept;
std::optional<Aggregation> parse_aggregation(std::string_view s) noexcept;

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  double max_error = 0.0;
  double r_squared = 0.0;  // NaN when the truths have no spread and the fit is imperfect
  std::size_t count = 0;
};

/// Metrics for paired predictions and truths (e = pred - truth).
Metrics compute_metrics(std::span<const double> pred, std::span<const double> truth);

Metrics utterance_metrics(const PredictionSet& preds, Gender gender);
Metrics speaker_metrics(const PredictionSet& preds, Gender gender,
                        Aggregation aggregation = Aggregation::MeanPrediction);

double accuracy(std::span<const Gender> predicted, std::span<const Gender> truth);

struct ReportCell {
  Gender gender = Gender::Male;
  Level level = Level::Utterance;
  Metrics metrics;
};

struct EvaluationReport {
  std::vector<ReportCell> cells;  // gender-major, utterance before speaker
  Aggregation aggregation = Aggregation::MeanPrediction;

  const ReportCell* find(Gender g, Level level) const noexcept;
};

/// Cells for every gender present in `preds`.
EvaluationReport evaluate(const PredictionSet& preds, Aggregation aggregation = Aggregation::MeanPrediction);

std::string report_to_text(const EvaluationReport& report);
std::string report_to_csv(const EvaluationReport& report);

std::string predictions_to_csv(const PredictionSet& preds);
PredictionSet parse_predictions_csv(std::string_view text);

}  // namespace voiceprofile
