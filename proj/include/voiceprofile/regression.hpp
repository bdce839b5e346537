#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "voiceprofile/error.hpp"

namespace voiceprofile {

enum class ModelKind { Ols, Pls, Baseline, Logistic };

std::string_view model_kind_tag(ModelKind kind) noexcept;

/// Per-vector transform applied to features before the affine map.
enum class InputTransform { None, L2Normalize };

/// Affine map from an embedding to a height (or, for Logistic, to a logit).
struct LinearModel {
  ModelKind kind = ModelKind::Baseline;
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  InputTransform transform = InputTransform::None;

  // Pls only.
  int n_components = 0;
  Eigen::VectorXd centering_means;

  // Set when the fit fell back (constant response for Pls, iteration cap for
  // Logistic). The model is still usable.
  bool degenerate = false;
  bool converged = true;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(coefficients.size()); }
};

struct PlsFitTrace {
  Eigen::VectorXd x_mean;
  double y_mean = 0.0;
  Eigen::MatrixXd weights;   // d x k, unit columns
  Eigen::MatrixXd loadings;  // d x k
  Eigen::VectorXd y_loadings;
  Eigen::VectorXd score_norms;
  Eigen::MatrixXd rotations;  // weights * (loadings' weights)^-1, nested in k
  Eigen::MatrixXd scores;     // n x k, only with PlsOptions::keep_scores

  int components() const noexcept { return static_cast<int>(weights.cols()); }

  /// Regression coefficients using the first k components (k clamped to the
  /// stored count). Nested: no refit is needed for smaller k.
  Eigen::VectorXd coefficients(int k) const;
  LinearModel model(int k) const;
};

struct PlsOptions {
  bool keep_scores = false;
  double early_stop = 1e-12;
};

struct PlsFit {
  LinearModel model;
  PlsFitTrace trace;
};

struct LogisticOptions {
  double lambda = 1e-4;
  int max_iterations = 100;
  double tolerance = 1e-8;
};

struct LogisticFit {
  LinearModel model;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective;  // penalized NLL per accepted iterate, starting at beta = 0
};

/// Constant model at the mean height; `dim` zero coefficients. A model with
/// dim 0 accepts inputs of any dimension.
LinearModel fit_baseline(std::span<const double> heights, std::size_t dim = 0);

/// Least squares on [1 | X] via complete orthogonal decomposition; the
/// minimum-norm solution when the design is rank deficient.
LinearModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// PLS1 by NIPALS on centered data. Throws TooManyComponents when
/// n_components is outside [1, d]. A constant response yields a
/// baseline-equivalent model with `degenerate` set.
PlsFit fit_pls1(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_components, const PlsOptions& opts = {});

/// L2-penalized logistic regression by IRLS with step halving. Labels are
/// 0/1; the intercept is not penalized.
LogisticFit fit_logistic(const Eigen::MatrixXd& x, std::span<const int> labels, const LogisticOptions& opts = {});

/// Penalized negative log-likelihood used by fit_logistic.
double logistic_objective(const Eigen::MatrixXd& x, std::span<const int> labels, double intercept,
                          const Eigen::VectorXd& coefficients, double lambda);

double predict(const LinearModel& model, std::span<const float> x);
double predict(const LinearModel& model, const Eigen::VectorXd& x);

/// Logistic models only: sigmoid output >= 0.5.
bool predict_label(const LinearModel& model, std::span<const float> x);

double sigmoid(double z) noexcept;

// Text persistence: "key=value" lines.
std::string model_to_text(const LinearModel& model);
LinearModel model_from_text(std::string_view text);
void save_model(const std::filesystem::path& path, const LinearModel& model);
LinearModel load_model(const std::filesystem::path& path);

}  // namespace voiceprofile
