#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "voiceprofile/dataset.hpp"
#include "voiceprofile/evaluation.hpp"
#include "voiceprofile/regression.hpp"
#include "voiceprofile/stats.hpp"

namespace voiceprofile {

enum class Method { Baseline, Mlr, Plsr };
enum class GenderMode { Oracle, Classifier };
/// Granularity of gender routing in classifier mode.
enum class Routing { Utterance, Speaker };

std::string_view method_name(Method m) noexcept;
std::optional<Method> parse_method(std::string_view s) noexcept;
std::string_view gender_mode_name(GenderMode m) noexcept;
std::optional<GenderMode> parse_gender_mode(std::string_view s) noexcept;

struct KRange {
  int first = 1;
  int last = 192;

  friend bool operator==(const KRange&, const KRange&) = default;
};

/// Parses "A-B" or a single "K".
std::optional<KRange> parse_k_range(std::string_view s) noexcept;

/// Where a dataset comes from. An empty `split` selects every utterance.
struct DatasetSpec {
  std::filesystem::path annotations;
  std::filesystem::path embeddings;
  std::filesystem::path splits;
  std::optional<Split> split;

  std::string describe() const;
};

Dataset load_dataset(const DatasetSpec& spec);

struct ExperimentConfig {
  DatasetSpec train;
  DatasetSpec test;
  std::optional<DatasetSpec> validation;
  std::optional<DatasetSpec> classifier_train;  // defaults to `train` in classifier mode
  Method method = Method::Baseline;
  KRange k_range;
  GenderMode gender_mode = GenderMode::Oracle;
  Routing routing = Routing::Utterance;
  Aggregation aggregation = Aggregation::MeanPrediction;
  bool l2_normalize = false;
  bool compare_baseline = false;
  std::filesystem::path out;
};

/// Flat key=value settings. Later assignments override earlier ones.
using ConfigMap = std::map<std::string, std::string, std::less<>>;

ConfigMap parse_config_text(std::string_view text);

/// Builds a config from key=value settings; relative paths resolve against
/// `base_dir`. Throws PipelineError at stage "config-validate".
ExperimentConfig config_from_map(const ConfigMap& kv, const std::filesystem::path& base_dir = {});

void validate_config(const ExperimentConfig& config);

/// Failure inside run_experiment, tagged with the stage that raised it.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// ---------------------------------------------------------------------------

/// Utterance rows of one gender: X (n x d) and each row's speaker height.
struct GenderDesign {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

GenderDesign gender_design(const Dataset& ds, Gender gender, bool l2_normalize);
Eigen::MatrixXd design_matrix(const std::vector<const EmbeddingRecord*>& rows, bool l2_normalize);

struct SweepResult {
  int best_k = 0;
  std::vector<int> ks;
  std::vector<double> validation_mae;
};

/// Fits PLS1 once at the largest k and scores every k in the range on the
/// validation rows by utterance MAE. Ties go to the smallest k.
SweepResult sweep_pls_components(const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y,
                                 const Eigen::MatrixXd& val_x, const Eigen::VectorXd& val_y, KRange k_range);

struct HierarchicalModel {
  std::optional<LinearModel> gender_classifier;
  LinearModel male_model;
  LinearModel female_model;
  std::optional<SweepResult> male_sweep;
  std::optional<SweepResult> female_sweep;

  const LinearModel& model_for(Gender g) const noexcept { return g == Gender::Male ? male_model : female_model; }
};

/// One regressor per gender. The two fits run concurrently.
HierarchicalModel train_per_gender(const Dataset& train, Method method, const Dataset* validation = nullptr,
                                   KRange k_range = {}, bool l2_normalize = false);

/// Logistic classifier with label 1 = male.
LinearModel train_gender_classifier(const Dataset& train, bool l2_normalize = false);

Gender classify_gender(const LinearModel& classifier, std::span<const float> x);

/// Routes each utterance to a gender regressor. Truth genders and heights
/// come from `annotations`; unknown speakers raise UnknownSpeaker.
PredictionSet predict_hierarchical(const HierarchicalModel& model, const std::vector<EmbeddingRecord>& utterances,
                                   const std::map<std::string, SpeakerAnnotation>& annotations, GenderMode mode,
                                   Routing routing = Routing::Utterance);

struct ExperimentResult {
  EvaluationReport report;
  PredictionSet predictions;
  HierarchicalModel model;
  std::optional<double> classifier_accuracy;
  std::map<Gender, PairedTTestResult> ttests;  // vs baseline, when requested
  std::map<Gender, double> within_2cm;
  std::vector<std::string> notes;
};

/// Train, predict, evaluate and (when `config.out` is set) write artifacts.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace voiceprofile
