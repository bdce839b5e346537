#include "voiceprofile/regression.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "voiceprofile/kernels.hpp"

namespace voiceprofile {

std::string_view model_kind_tag(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Ols: return "ols";
    case ModelKind::Pls: return "pls";
    case ModelKind::Baseline: return "baseline";
    case ModelKind::Logistic: return "logistic";
  }
  return "unknown";
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

void check_design(const Eigen::MatrixXd& x, Eigen::Index n_targets) {
  if (x.rows() != n_targets) {
    throw Error(ErrorCode::DimMismatch, fmt::format("design has {} rows, target has {}", x.rows(), n_targets));
  }
  if (x.rows() < 1 || x.cols() < 1) throw Error(ErrorCode::EmptyTrainingSet, "empty design matrix");
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "design matrix");
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;
  return a;
}

// log(1 + exp(z)) without overflow.
double softplus(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

LinearModel fit_baseline(std::span<const double> heights, std::size_t dim) {
  if (heights.empty()) throw Error(ErrorCode::EmptyTrainingSet, "baseline needs at least one height");
  double sum = 0.0;
  for (double h : heights) {
    if (!std::isfinite(h)) throw Error(ErrorCode::NonFiniteInput, "height");
    sum += h;
  }
  LinearModel m;
  m.kind = ModelKind::Baseline;
  m.intercept = sum / static_cast<double>(heights.size());
  m.coefficients = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  return m;
}

LinearModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  check_design(x, y.size());
  if (!y.allFinite()) throw Error(ErrorCode::NonFiniteInput, "response");

  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(with_intercept(x));
  const Eigen::VectorXd beta = cod.solve(y);
  if (cod.rank() < x.cols() + 1) {
    spdlog::debug("ols: rank {} < {} columns, using minimum-norm solution", cod.rank(), x.cols() + 1);
  }

  LinearModel m;
  m.kind = ModelKind::Ols;
  m.intercept = beta(0);
  m.coefficients = beta.tail(x.cols());
  return m;
}

// ---------------------------------------------------------------------------
// PLS1

Eigen::VectorXd PlsFitTrace::coefficients(int k) const {
  k = std::clamp(k, 0, components());
  if (k == 0) return Eigen::VectorXd::Zero(x_mean.size());
  return rotations.leftCols(k) * y_loadings.head(k);
}

LinearModel PlsFitTrace::model(int k) const {
  LinearModel m;
  m.kind = ModelKind::Pls;
  m.n_components = std::clamp(k, 0, components());
  m.coefficients = coefficients(k);
  m.intercept = y_mean - x_mean.dot(m.coefficients);
  m.centering_means = x_mean;
  m.degenerate = components() == 0;
  return m;
}

PlsFit fit_pls1(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_components, const PlsOptions& opts) {
  check_design(x, y.size());
  if (!y.allFinite()) throw Error(ErrorCode::NonFiniteInput, "response");
  if (x.rows() < 2) throw Error(ErrorCode::EmptyTrainingSet, "PLS needs at least two rows");
  if (n_components < 1 || n_components > x.cols()) {
    throw Error(ErrorCode::TooManyComponents, fmt::format("{} components requested for d = {}", n_components, x.cols()));
  }

  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();

  PlsFitTrace tr;
  tr.x_mean = x.colwise().mean().transpose();
  tr.y_mean = y.mean();

  Eigen::MatrixXd e = x.rowwise() - tr.x_mean.transpose();
  Eigen::VectorXd f = y.array() - tr.y_mean;

  Eigen::MatrixXd w_all(d, n_components), p_all(d, n_components), t_all;
  Eigen::VectorXd q_all(n_components), t_norms(n_components);
  if (opts.keep_scores) t_all.resize(n, n_components);

  // A response that is constant up to rounding carries no direction.
  const bool constant_y = f.norm() <= 1e-12 * std::abs(tr.y_mean) * std::sqrt(static_cast<double>(n));
  const double initial = constant_y ? 0.0 : (e.transpose() * f).norm();

  int k = 0;
  if (initial > 0.0) {
    for (; k < n_components; ++k) {
      Eigen::VectorXd w = e.transpose() * f;
      const double wn = w.norm();
      if (k > 0 && wn < opts.early_stop * initial) break;
      w /= wn;
      const Eigen::VectorXd t = e * w;
      const double tt = t.squaredNorm();
      if (!(tt > 0.0)) break;
      const Eigen::VectorXd p = e.transpose() * t / tt;
      const double q = f.dot(t) / tt;
      e.noalias() -= t * p.transpose();
      f -= q * t;

      w_all.col(k) = w;
      p_all.col(k) = p;
      q_all(k) = q;
      t_norms(k) = std::sqrt(tt);
      if (opts.keep_scores) t_all.col(k) = t;
    }
  }
  if (k < n_components) {
    spdlog::debug("pls: stopped after {} of {} components", k, n_components);
  }

  tr.weights = w_all.leftCols(k);
  tr.loadings = p_all.leftCols(k);
  tr.y_loadings = q_all.head(k);
  tr.score_norms = t_norms.head(k);
  if (opts.keep_scores) tr.scores = t_all.leftCols(k);

  // P'W is unit upper triangular, so W (P'W)^-1 restricted to the first k
  // columns equals the same product for the first k components alone.
  if (k > 0) {
    const Eigen::MatrixXd pw = tr.loadings.transpose() * tr.weights;
    tr.rotations = pw.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(tr.weights);
  } else {
    tr.rotations.resize(d, 0);
    spdlog::warn("pls: degenerate response, falling back to the mean");
  }

  PlsFit out;
  out.model = tr.model(k);
  out.trace = std::move(tr);
  return out;
}

// ---------------------------------------------------------------------------
// Logistic regression

double logistic_objective(const Eigen::MatrixXd& x, std::span<const int> labels, double intercept,
                          const Eigen::VectorXd& coefficients, double lambda) {
  const Eigen::VectorXd eta = (x * coefficients).array() + intercept;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) nll += softplus(eta(i)) - labels[static_cast<std::size_t>(i)] * eta(i);
  return nll + 0.5 * lambda * coefficients.squaredNorm();
}

LogisticFit fit_logistic(const Eigen::MatrixXd& x, std::span<const int> labels, const LogisticOptions& opts) {
  check_design(x, static_cast<Eigen::Index>(labels.size()));
  if (x.rows() < 2) throw Error(ErrorCode::EmptyTrainingSet, "logistic regression needs at least two rows");
  std::size_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  if (positives == 0 || positives == labels.size()) throw Error(ErrorCode::SingleClass, "both classes are required");

  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::MatrixXd a = with_intercept(x);
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv(i) = labels[static_cast<std::size_t>(i)];

  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d + 1, opts.lambda);
  penalty(0) = 0.0;

  auto objective = [&](const Eigen::VectorXd& b) {
    return logistic_objective(x, labels, b(0), b.tail(d), opts.lambda);
  };

  LogisticFit fit;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
  double current = objective(beta);
  fit.objective.push_back(current);

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    const Eigen::VectorXd eta = a * beta;
    Eigen::VectorXd prob(n), weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = sigmoid(eta(i));
      weight(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad = a.transpose() * (prob - yv) + penalty.cwiseProduct(beta);

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d + 1, d + 1);
    hess.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose() * weight.cwiseSqrt().asDiagonal());
    hess.diagonal() += penalty;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess.selfadjointView<Eigen::Lower>());
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
      // Saturated probabilities can leave the intercept direction flat.
      hess.diagonal().array() += 1e-10 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
      ldlt.compute(hess.selfadjointView<Eigen::Lower>());
    }
    const Eigen::VectorXd step = ldlt.solve(grad);

    double scale = 1.0;
    Eigen::VectorXd candidate = beta - step;
    double value = objective(candidate);
    for (int halvings = 0; halvings < 40 && !(value <= current); ++halvings) {
      scale *= 0.5;
      candidate = beta - scale * step;
      value = objective(candidate);
    }
    if (!(value <= current)) break;  // no descent possible at double precision

    const double change = (candidate - beta).lpNorm<Eigen::Infinity>();
    beta = candidate;
    current = value;
    fit.objective.push_back(current);
    fit.iterations = iter;
    if (change < opts.tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) spdlog::warn("logistic: no convergence after {} iterations", fit.iterations);

  fit.model.kind = ModelKind::Logistic;
  fit.model.intercept = beta(0);
  fit.model.coefficients = beta.tail(d);
  fit.model.converged = fit.converged;
  return fit;
}

// ---------------------------------------------------------------------------
// Prediction

namespace {

double finish(const LinearModel& model, double affine) {
  return model.kind == ModelKind::Logistic ? sigmoid(affine) : affine;
}

void check_dim(const LinearModel& model, std::size_t dim) {
  if (model.kind == ModelKind::Baseline && model.dim() == 0) return;
  if (dim != model.dim()) throw Error(ErrorCode::DimMismatch, fmt::format("expected {}, found {}", model.dim(), dim));
}

}  // namespace

double predict(const LinearModel& model, std::span<const float> x) {
  check_dim(model, x.size());
  if (model.dim() == 0) return finish(model, model.intercept);
  double lin = kernels::dot(x, std::span<const double>(model.coefficients.data(), model.dim()));
  if (model.transform == InputTransform::L2Normalize) {
    const double norm = std::sqrt(kernels::squared_norm(x));
    if (norm > 0.0) lin /= norm;
  }
  return finish(model, model.intercept + lin);
}

double predict(const LinearModel& model, const Eigen::VectorXd& x) {
  check_dim(model, static_cast<std::size_t>(x.size()));
  if (model.dim() == 0) return finish(model, model.intercept);
  double lin = model.coefficients.dot(x);
  if (model.transform == InputTransform::L2Normalize) {
    const double norm = x.norm();
    if (norm > 0.0) lin /= norm;
  }
  return finish(model, model.intercept + lin);
}

bool predict_label(const LinearModel& model, std::span<const float> x) {
  if (model.kind != ModelKind::Logistic) throw Error(ErrorCode::InvalidArgument, "predict_label needs a logistic model");
  return predict(model, x) >= 0.5;
}

}  // namespace voiceprofile
