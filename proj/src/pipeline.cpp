#include "voiceprofile/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "text_util.hpp"

namespace voiceprofile {

Dataset load_dataset(const DatasetSpec& spec) {
  auto annotations = load_annotations(spec.annotations);
  auto embeddings = read_embeddings_any(spec.embeddings);
  std::vector<SplitAssignment> splits;
  if (!spec.splits.empty()) splits = load_splits(spec.splits);
  auto ds = Dataset::join(std::move(annotations), std::move(embeddings), std::move(splits));
  return spec.split ? ds.select(*spec.split) : ds;
}

Eigen::MatrixXd design_matrix(const std::vector<const EmbeddingRecord*>& rows, bool l2_normalize) {
  const Eigen::Index d = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front()->dim());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto& v = rows[static_cast<std::size_t>(i)]->vector;
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = v[static_cast<std::size_t>(j)];
    if (l2_normalize) {
      const double norm = x.row(i).norm();
      if (norm > 0.0) x.row(i) /= norm;
    }
  }
  return x;
}

GenderDesign gender_design(const Dataset& ds, Gender gender, bool l2_normalize) {
  const auto rows = ds.utterances_of(gender);
  GenderDesign g;
  g.x = design_matrix(rows, l2_normalize);
  g.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) g.y(static_cast<Eigen::Index>(i)) = ds.annotation(rows[i]->speaker_id).height_cm;
  return g;
}

namespace {

struct SweepFit {
  SweepResult result;
  PlsFit fit;
};

SweepFit sweep_with_trace(const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y, const Eigen::MatrixXd& val_x,
                          const Eigen::VectorXd& val_y, KRange k_range) {
  if (val_x.rows() == 0) throw Error(ErrorCode::EmptyValidation, "no validation rows");
  if (val_x.cols() != train_x.cols()) {
    throw Error(ErrorCode::DimMismatch, fmt::format("validation dim {} vs train dim {}", val_x.cols(), train_x.cols()));
  }
  if (k_range.first < 1 || k_range.last < k_range.first) throw Error(ErrorCode::InvalidArgument, "empty k range");
  if (k_range.first > train_x.cols()) {
    throw Error(ErrorCode::TooManyComponents, fmt::format("k range starts at {} but d = {}", k_range.first, train_x.cols()));
  }
  const int k_max = std::min<int>(k_range.last, static_cast<int>(train_x.cols()));

  SweepFit out;
  out.fit = fit_pls1(train_x, train_y, k_max);
  const auto& tr = out.fit.trace;

  // Validation scores on the nested rotations: prediction with k components
  // is y_mean + sum_{i<k} q_i * t_i.
  const Eigen::MatrixXd scores = (val_x.rowwise() - tr.x_mean.transpose()) * tr.rotations;
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(val_x.rows(), tr.y_mean);
  int applied = 0;

  auto& r = out.result;
  double best = std::numeric_limits<double>::infinity();
  for (int k = k_range.first; k <= k_max; ++k) {
    for (; applied < std::min(k, tr.components()); ++applied) pred += tr.y_loadings(applied) * scores.col(applied);
    const double mae = (pred - val_y).cwiseAbs().mean();
    r.ks.push_back(k);
    r.validation_mae.push_back(mae);
    if (mae < best) {
      best = mae;
      r.best_k = k;
    }
  }
  return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

SweepResult sweep_pls_components(const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y,
                                 const Eigen::MatrixXd& val_x, const Eigen::VectorXd& val_y, KRange k_range) {
  return sweep_with_trace(train_x, train_y, val_x, val_y, k_range).result;
}

HierarchicalModel train_per_gender(const Dataset& train, Method method, const Dataset* validation, KRange k_range,
                                   bool l2_normalize) {
  for (Gender g : kGenders) {
    if (train.utterances_of(g).empty()) {
      throw Error(ErrorCode::MissingGender, fmt::format("training set has no {} utterances", gender_name(g)));
    }
  }
  if (method == Method::Plsr && validation == nullptr) {
    throw Error(ErrorCode::EmptyValidation, "PLSR component selection needs a validation set");
  }

  struct Fitted {
    LinearModel model;
    std::optional<SweepResult> sweep;
  };

  auto fit_one = [&](Gender g) -> Fitted {
    const auto design = gender_design(train, g, l2_normalize);
    Fitted f;
    switch (method) {
      case Method::Baseline:
        f.model = fit_baseline(to_std(design.y), static_cast<std::size_t>(design.x.cols()));
        break;
      case Method::Mlr:
        f.model = fit_ols(design.x, design.y);
        break;
      case Method::Plsr: {
        const auto val = gender_design(*validation, g, l2_normalize);
        if (val.x.rows() == 0) {
          throw Error(ErrorCode::EmptyValidation, fmt::format("validation set has no {} utterances", gender_name(g)));
        }
        auto swept = sweep_with_trace(design.x, design.y, val.x, val.y, k_range);
        f.model = swept.fit.trace.model(swept.result.best_k);
        spdlog::info("plsr {}: selected {} components (validation MAE {:.4f})", gender_name(g), swept.result.best_k,
                     *std::min_element(swept.result.validation_mae.begin(), swept.result.validation_mae.end()));
        f.sweep = std::move(swept.result);
        break;
      }
    }
    if (l2_normalize && method != Method::Baseline) f.model.transform = InputTransform::L2Normalize;
    return f;
  };

  auto female = std::async(std::launch::async, fit_one, Gender::Female);
  Fitted male = fit_one(Gender::Male);
  Fitted fem = female.get();

  HierarchicalModel m;
  m.male_model = std::move(male.model);
  m.male_sweep = std::move(male.sweep);
  m.female_model = std::move(fem.model);
  m.female_sweep = std::move(fem.sweep);
  return m;
}

LinearModel train_gender_classifier(const Dataset& train, bool l2_normalize) {
  std::vector<const EmbeddingRecord*> rows;
  std::vector<int> labels;
  for (const auto& e : train.embeddings()) {
    rows.push_back(&e);
    labels.push_back(train.annotation(e.speaker_id).gender == Gender::Male ? 1 : 0);
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "classifier training set is empty");
  auto fit = fit_logistic(design_matrix(rows, l2_normalize), labels);
  if (l2_normalize) fit.model.transform = InputTransform::L2Normalize;
  return fit.model;
}

Gender classify_gender(const LinearModel& classifier, std::span<const float> x) {
  return predict_label(classifier, x) ? Gender::Male : Gender::Female;
}

PredictionSet predict_hierarchical(const HierarchicalModel& model, const std::vector<EmbeddingRecord>& utterances,
                                   const std::map<std::string, SpeakerAnnotation>& annotations, GenderMode mode,
                                   Routing routing) {
  if (mode == GenderMode::Classifier && !model.gender_classifier) {
    throw Error(ErrorCode::InvalidArgument, "classifier mode needs a gender classifier");
  }

  std::vector<const SpeakerAnnotation*> truth(utterances.size());
  std::vector<Gender> route(utterances.size());
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const auto it = annotations.find(utterances[i].speaker_id);
    if (it == annotations.end()) {
      throw Error(ErrorCode::UnknownSpeaker, fmt::format("{} (utterance {})", utterances[i].speaker_id, utterances[i].utterance_id));
    }
    truth[i] = &it->second;
    route[i] = mode == GenderMode::Oracle ? it->second.gender : classify_gender(*model.gender_classifier, utterances[i].vector);
  }

  if (mode == GenderMode::Classifier && routing == Routing::Speaker) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> votes;  // (male, female)
    for (std::size_t i = 0; i < utterances.size(); ++i) {
      auto& v = votes[utterances[i].speaker_id];
      (route[i] == Gender::Male ? v.first : v.second) += 1;
    }
    for (std::size_t i = 0; i < utterances.size(); ++i) {
      const auto& v = votes[utterances[i].speaker_id];
      route[i] = v.first >= v.second ? Gender::Male : Gender::Female;
    }
  }

  PredictionSet out;
  out.reserve(utterances.size());
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const auto& u = utterances[i];
    out.push_back({u.utterance_id, u.speaker_id, truth[i]->gender, route[i], predict(model.model_for(route[i]), u.vector),
                   truth[i]->height_cm});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment orchestration

namespace {

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  spdlog::debug("stage {}", name);
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, fmt::format("write failed for '{}'", path.string()));
}

std::vector<double> abs_errors(const PredictionSet& preds, Gender g) {
  std::vector<double> out;
  for (const auto& r : preds)
    if (r.gender == g) out.push_back(std::fabs(r.predicted_cm - r.true_cm));
  return out;
}

std::string sweep_csv(const SweepResult& s) {
  std::string out = "k,validation_mae_cm\n";
  for (std::size_t i = 0; i < s.ks.size(); ++i) out += fmt::format("{},{}\n", s.ks[i], detail::shortest(s.validation_mae[i]));
  return out;
}

std::string header_text(const ExperimentConfig& c, const ExperimentResult& r) {
  std::string out;
  out += fmt::format("method: {}\n", method_name(c.method));
  out += fmt::format("train: {}\n", c.train.describe());
  out += fmt::format("test: {}\n", c.test.describe());
  if (c.validation) out += fmt::format("validation: {}\n", c.validation->describe());
  out += fmt::format("gender mode: {}\n", gender_mode_name(c.gender_mode));
  out += fmt::format("l2 normalize: {}\n", c.l2_normalize ? "yes" : "no");
  if (c.method == Method::Plsr) {
    out += fmt::format("components: male {} female {}\n", r.model.male_model.n_components, r.model.female_model.n_components);
  }
  if (r.classifier_accuracy) out += fmt::format("gender classifier accuracy: {:.4f}\n", *r.classifier_accuracy);
  for (const auto& note : r.notes) out += fmt::format("note: {}\n", note);
  out += '\n';
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  stage("config-validate", [&] { validate_config(config); });

  ExperimentResult result;

  struct Loaded {
    Dataset train, test;
    std::optional<Dataset> validation, classifier;
  };
  const Loaded data = stage("load", [&] {
    Loaded l{load_dataset(config.train), load_dataset(config.test), std::nullopt, std::nullopt};
    if (config.validation) l.validation = load_dataset(*config.validation);
    if (config.gender_mode == GenderMode::Classifier && config.classifier_train) {
      l.classifier = load_dataset(*config.classifier_train);
    }
    if (l.test.embeddings().empty()) throw Error(ErrorCode::EmptyInput, "test set has no utterances");
    if (l.train.dim() != l.test.dim()) {
      throw Error(ErrorCode::DimMismatch, fmt::format("train dim {} vs test dim {}", l.train.dim(), l.test.dim()));
    }
    return l;
  });

  std::optional<HierarchicalModel> baseline;
  stage("train", [&] {
    result.model = train_per_gender(data.train, config.method, data.validation ? &*data.validation : nullptr,
                                    config.k_range, config.l2_normalize);
    if (config.gender_mode == GenderMode::Classifier) {
      const Dataset& cls = data.classifier ? *data.classifier : data.train;
      if (!data.classifier) result.notes.push_back("gender classifier trained on the regression training set");
      result.model.gender_classifier = train_gender_classifier(cls, config.l2_normalize);
    }
    if (config.compare_baseline) {
      baseline = train_per_gender(data.train, Method::Baseline);
      baseline->gender_classifier = result.model.gender_classifier;
    }
  });

  PredictionSet baseline_preds;
  stage("predict", [&] {
    result.predictions = predict_hierarchical(result.model, data.test.embeddings(), data.test.annotations(),
                                              config.gender_mode, config.routing);
    if (baseline) {
      baseline_preds = predict_hierarchical(*baseline, data.test.embeddings(), data.test.annotations(),
                                            config.gender_mode, config.routing);
    }
  });

  std::map<Gender, EcdfCurve> curves, baseline_curves;
  stage("evaluate", [&] {
    result.report = evaluate(result.predictions, config.aggregation);
    if (config.gender_mode == GenderMode::Classifier) {
      std::vector<Gender> predicted, truth;
      for (const auto& r : result.predictions) {
        predicted.push_back(r.routed_gender);
        truth.push_back(r.gender);
      }
      result.classifier_accuracy = accuracy(predicted, truth);
    }
    for (Gender g : kGenders) {
      const auto errs = abs_errors(result.predictions, g);
      if (errs.empty()) continue;
      curves[g] = build_ecdf(errs);
      result.within_2cm[g] = ecdf_at(curves[g], 2.0);
      if (baseline) {
        const auto base = abs_errors(baseline_preds, g);
        baseline_curves[g] = build_ecdf(base);
        if (errs.size() >= 2) result.ttests[g] = paired_t_test(errs, base);
      }
    }
  });

  if (config.out.empty()) return result;

  stage("write", [&] {
    std::filesystem::create_directories(config.out);
    const auto& out = config.out;

    std::string text = header_text(config, result) + report_to_text(result.report);
    for (const auto& [g, p] : result.within_2cm) {
      text += fmt::format("P(|error| <= 2 cm) {}: {:.4f}", gender_name(g), p);
      if (baseline_curves.contains(g)) text += fmt::format(" (baseline {:.4f})", ecdf_at(baseline_curves.at(g), 2.0));
      text += '\n';
    }
    for (const auto& [g, t] : result.ttests) {
      text += fmt::format("paired t-test vs baseline {}: t({}) = {:.4f}, p = {:.4g}\n", gender_name(g),
                          t.degrees_of_freedom, t.t_statistic, t.p_value_two_tailed);
    }
    write_file(out / "report.txt", text);
    write_file(out / "report.csv", report_to_csv(result.report));
    write_file(out / "predictions.csv", predictions_to_csv(result.predictions));

    for (const auto& [g, curve] : curves) write_file(out / fmt::format("ecdf_{}.csv", gender_name(g)), ecdf_to_csv(curve));
    for (const auto& [g, curve] : baseline_curves) {
      write_file(out / fmt::format("ecdf_baseline_{}.csv", gender_name(g)), ecdf_to_csv(curve));
    }

    save_model(out / "model_male.txt", result.model.male_model);
    save_model(out / "model_female.txt", result.model.female_model);
    if (result.model.gender_classifier) save_model(out / "model_gender.txt", *result.model.gender_classifier);
    if (result.model.male_sweep) write_file(out / "sweep_male.csv", sweep_csv(*result.model.male_sweep));
    if (result.model.female_sweep) write_file(out / "sweep_female.csv", sweep_csv(*result.model.female_sweep));

    if (!result.ttests.empty()) {
      std::string t = "gender,t,df,p_two_tailed,mean_difference_cm,n_pairs\n";
      for (const auto& [g, r] : result.ttests) {
        t += fmt::format("{},{},{},{},{},{}\n", gender_name(g), detail::shortest(r.t_statistic), r.degrees_of_freedom,
                         detail::shortest(r.p_value_two_tailed), detail::shortest(r.mean_difference), r.n_pairs);
      }
      write_file(out / "ttest.csv", t);
    }
  });
  return result;
}

}  // namespace voiceprofile
