// voiceprofile: height estimation from speaker embeddings.
//
//   voiceprofile stats    --annotations FILE [--bin-width N] [--out DIR]
//   voiceprofile train    --annotations FILE --embeddings FILE [--splits FILE] --method M --out DIR
//   voiceprofile predict  --models DIR --annotations FILE --embeddings FILE [--out DIR]
//   voiceprofile evaluate --predictions FILE [--aggregation A] [--out DIR]
//   voiceprofile sweep    --annotations FILE --embeddings FILE --validation FILE [--k-range A-B]
//   voiceprofile ttest    ERRORS_A ERRORS_B
//   voiceprofile ecdf     --errors FILE [--at X] [--out DIR]
//   voiceprofile run      --config FILE [overrides]
//
// Data goes to stdout, diagnostics to stderr.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "voiceprofile/dataset.hpp"
#include "voiceprofile/evaluation.hpp"
#include "voiceprofile/log.hpp"
#include "voiceprofile/pipeline.hpp"
#include "voiceprofile/regression.hpp"
#include "voiceprofile/stats.hpp"

namespace fs = std::filesystem;
using namespace voiceprofile;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

/// One number per line; the first field of comma-separated lines; a
/// non-numeric first line is a header.
std::vector<double> read_values(const fs::path& path) {
  std::vector<double> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string field = line.substr(0, line.find(','));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != field.size() || used == 0) {
      if (line_no == 1) continue;
      throw Error(ErrorCode::MalformedRow, fmt::format("{}:{}: not a number", path.string(), line_no));
    }
    out.push_back(v);
  }
  return out;
}

std::optional<Split> parse_split_selector(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  if (s == "all") return std::nullopt;
  throw UsageError(fmt::format("--split: expected train|test|all, got '{}'", s));
}

struct DataFlags {
  std::string annotations;
  std::string embeddings;
  std::string splits;
  std::string split = "all";

  DatasetSpec spec() const {
    DatasetSpec s{annotations, embeddings, splits, parse_split_selector(split)};
    if (s.split && s.splits.empty()) throw UsageError("--split needs --splits");
    return s;
  }
};

void add_data_flags(CLI::App* cmd, DataFlags& f, const std::string& default_split) {
  f.split = default_split;
  cmd->add_option("--annotations", f.annotations, "Speaker annotations TSV")->required();
  cmd->add_option("--embeddings", f.embeddings, "Embeddings file (binary, or .tsv)")->required();
  cmd->add_option("--splits", f.splits, "Speaker split TSV");
  cmd->add_option("--split", f.split, "Split to use: train|test|all")->capture_default_str();
}

// ---------------------------------------------------------------------------

int cmd_stats(const std::string& annotations_path, std::optional<double> bin_width, const std::string& out_dir) {
  const auto annotations = load_annotations(annotations_path);
  if (annotations.empty()) throw Error(ErrorCode::EmptyGroup, fmt::format("no annotations in '{}'", annotations_path));

  fmt::print("{:<8} {:>6} {:>8} {:>8} {:>6} {:>6} {:>6}\n", "gender", "count", "mean", "median", "std", "min", "max");
  for (Gender g : kGenders) {
    const bool present = std::any_of(annotations.begin(), annotations.end(), [g](const auto& a) { return a.gender == g; });
    if (!present) continue;
    const auto s = compute_gender_stats(annotations, g);
    fmt::print("{:<8} {:>6} {:>8.2f} {:>8.1f} {:>6.2f} {:>6} {:>6}\n", gender_name(g), s.count, s.mean, s.median, s.std,
               s.min, s.max);
  }

  if (bin_width) {
    std::string csv = "gender,bin_left_cm,count\n";
    for (Gender g : kGenders) {
      const bool present = std::any_of(annotations.begin(), annotations.end(), [g](const auto& a) { return a.gender == g; });
      if (!present) continue;
      for (const auto& bin : histogram(annotations, g, *bin_width)) {
        csv += fmt::format("{},{},{}\n", gender_name(g), bin.left_cm, bin.count);
      }
    }
    if (out_dir.empty()) {
      fmt::print("\n{}", csv);
    } else {
      fs::create_directories(out_dir);
      write_file(fs::path(out_dir) / "histogram.csv", csv);
    }
  }
  return 0;
}

struct TrainFlags {
  DataFlags data;
  std::string method = "baseline";
  std::string k_range = "1-192";
  std::string validation;
  std::string gender_mode = "oracle";
  std::string classifier_train;
  bool l2_normalize = false;
  std::string out;
};

int cmd_train(const TrainFlags& f) {
  const auto method = parse_method(f.method);
  if (!method) throw UsageError(fmt::format("--method: expected baseline|mlr|plsr, got '{}'", f.method));
  const auto mode = parse_gender_mode(f.gender_mode);
  if (!mode) throw UsageError(fmt::format("--gender-mode: expected oracle|classifier, got '{}'", f.gender_mode));
  const auto k_range = parse_k_range(f.k_range);
  if (!k_range) throw UsageError(fmt::format("--k-range: bad range '{}'", f.k_range));
  if (*method == Method::Plsr && f.validation.empty()) throw UsageError("--method plsr needs --validation");

  const auto train = load_dataset(f.data.spec());
  std::optional<Dataset> validation;
  if (!f.validation.empty()) validation = load_dataset({f.data.annotations, f.validation, {}, std::nullopt});

  auto model = train_per_gender(train, *method, validation ? &*validation : nullptr, *k_range, f.l2_normalize);
  if (*mode == GenderMode::Classifier) {
    const auto cls = f.classifier_train.empty()
                         ? train
                         : load_dataset({f.data.annotations, f.classifier_train, {}, std::nullopt});
    model.gender_classifier = train_gender_classifier(cls, f.l2_normalize);
  }

  fs::create_directories(f.out);
  const fs::path out(f.out);
  save_model(out / "model_male.txt", model.male_model);
  save_model(out / "model_female.txt", model.female_model);
  if (model.gender_classifier) save_model(out / "model_gender.txt", *model.gender_classifier);
  for (const auto& [g, sweep] : {std::pair{Gender::Male, &model.male_sweep}, std::pair{Gender::Female, &model.female_sweep}}) {
    if (!*sweep) continue;
    std::string csv = "k,validation_mae_cm\n";
    for (std::size_t i = 0; i < (*sweep)->ks.size(); ++i) csv += fmt::format("{},{}\n", (*sweep)->ks[i], (*sweep)->validation_mae[i]);
    write_file(out / fmt::format("sweep_{}.csv", gender_name(g)), csv);
    fmt::print("{}: {} components\n", gender_name(g), (*sweep)->best_k);
  }
  fmt::print("models written to {}\n", out.string());
  return 0;
}

struct PredictFlags {
  DataFlags data;
  std::string models;
  std::string gender_mode = "oracle";
  std::string routing = "utterance";
  std::string out;
};

int cmd_predict(const PredictFlags& f) {
  const auto mode = parse_gender_mode(f.gender_mode);
  if (!mode) throw UsageError(fmt::format("--gender-mode: expected oracle|classifier, got '{}'", f.gender_mode));
  if (f.routing != "utterance" && f.routing != "speaker") throw UsageError("--gender-routing: expected utterance|speaker");

  const fs::path dir(f.models);
  HierarchicalModel model;
  model.male_model = load_model(dir / "model_male.txt");
  model.female_model = load_model(dir / "model_female.txt");
  if (*mode == GenderMode::Classifier) model.gender_classifier = load_model(dir / "model_gender.txt");

  const auto test = load_dataset(f.data.spec());
  const auto preds = predict_hierarchical(model, test.embeddings(), test.annotations(), *mode,
                                          f.routing == "speaker" ? Routing::Speaker : Routing::Utterance);
  const auto csv = predictions_to_csv(preds);
  if (f.out.empty()) {
    fmt::print("{}", csv);
  } else {
    fs::create_directories(f.out);
    write_file(fs::path(f.out) / "predictions.csv", csv);
  }
  return 0;
}

int cmd_evaluate(const std::string& predictions_path, const std::string& aggregation_flag, const std::string& out_dir) {
  const auto aggregation = parse_aggregation(aggregation_flag);
  if (!aggregation) throw UsageError("--aggregation: expected mean-prediction|mean-abs-error");
  const auto preds = parse_predictions_csv(read_text_file(predictions_path));
  if (preds.empty()) throw Error(ErrorCode::EmptyInput, fmt::format("no predictions in '{}'", predictions_path));
  const auto report = evaluate(preds, *aggregation);
  fmt::print("{}", report_to_text(report));
  if (!out_dir.empty()) {
    const fs::path out(out_dir);
    fs::create_directories(out);
    write_file(out / "report.txt", report_to_text(report));
    write_file(out / "report.csv", report_to_csv(report));
    for (Gender g : kGenders) {
      std::vector<double> errs;
      for (const auto& r : preds)
        if (r.gender == g) errs.push_back(std::fabs(r.predicted_cm - r.true_cm));
      if (!errs.empty()) write_file(out / fmt::format("ecdf_{}.csv", gender_name(g)), ecdf_to_csv(build_ecdf(errs)));
    }
  }
  return 0;
}

struct SweepFlags {
  DataFlags data;
  std::string validation;
  std::string k_range = "1-192";
  bool l2_normalize = false;
};

int cmd_sweep(const SweepFlags& f) {
  const auto k_range = parse_k_range(f.k_range);
  if (!k_range) throw UsageError(fmt::format("--k-range: bad range '{}'", f.k_range));
  const auto train = load_dataset(f.data.spec());
  const auto validation = load_dataset({f.data.annotations, f.validation, {}, std::nullopt});

  fmt::print("gender,k,validation_mae_cm\n");
  for (Gender g : kGenders) {
    const auto tr = gender_design(train, g, f.l2_normalize);
    const auto val = gender_design(validation, g, f.l2_normalize);
    if (tr.x.rows() == 0) throw Error(ErrorCode::MissingGender, fmt::format("no {} training rows", gender_name(g)));
    const auto sweep = sweep_pls_components(tr.x, tr.y, val.x, val.y, *k_range);
    for (std::size_t i = 0; i < sweep.ks.size(); ++i) fmt::print("{},{},{}\n", gender_name(g), sweep.ks[i], sweep.validation_mae[i]);
    std::fprintf(stderr, "%s: best k = %d\n", std::string(gender_name(g)).c_str(), sweep.best_k);
  }
  return 0;
}

int cmd_ttest(const std::string& a_path, const std::string& b_path) {
  const auto a = read_values(a_path);
  const auto b = read_values(b_path);
  const auto r = paired_t_test(a, b);
  fmt::print("t={} df={} p={}\n", r.t_statistic, r.degrees_of_freedom, r.p_value_two_tailed);
  if (r.zero_variance) spdlog::warn("all differences are equal; p reported as 0");
  return 0;
}

int cmd_ecdf(const std::string& errors_path, std::optional<double> at, const std::string& out_dir) {
  const auto curve = build_ecdf(read_values(errors_path));
  if (at) {
    fmt::print("F({})={}\n", *at, ecdf_at(curve, *at));
    return 0;
  }
  if (out_dir.empty()) {
    fmt::print("{}", ecdf_to_csv(curve));
  } else {
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "ecdf.csv", ecdf_to_csv(curve));
  }
  return 0;
}

struct RunFlags {
  std::string config;
  std::string annotations, embeddings, splits, validation;
  std::string method, k_range, gender_mode, classifier_train, aggregation, out;
  bool l2_normalize = false;
};

int cmd_run(const RunFlags& f) {
  ConfigMap kv;
  fs::path base;
  if (!f.config.empty()) {
    kv = parse_config_text(read_text_file(f.config));
    base = fs::absolute(f.config).parent_path();
  }
  const auto set_path = [&](const char* key, const std::string& v) {
    if (!v.empty()) kv[key] = fs::absolute(v).string();
  };
  const auto set_value = [&](const char* key, const std::string& v) {
    if (!v.empty()) kv[key] = v;
  };
  set_path("annotations", f.annotations);
  set_path("embeddings", f.embeddings);
  set_path("splits", f.splits);
  set_path("validation_embeddings", f.validation);
  set_path("classifier_train_embeddings", f.classifier_train);
  set_path("out", f.out);
  set_value("method", f.method);
  set_value("k_range", f.k_range);
  set_value("gender_mode", f.gender_mode);
  set_value("aggregation", f.aggregation);
  if (f.l2_normalize) kv["l2_normalize"] = "true";

  const auto config = config_from_map(kv, base);
  if (config.out.empty()) throw PipelineError("config-validate", "no output directory (out= or --out)");
  run_experiment(config);
  fmt::print("{}", read_text_file(config.out / "report.txt"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();

  CLI::App app{"Speaker height estimation from speaker embeddings"};
  app.require_subcommand(1);
  std::function<int()> action;

  // stats
  std::string stats_annotations, stats_out;
  std::optional<double> stats_bin_width;
  auto* stats = app.add_subcommand("stats", "Per-gender height statistics and histograms");
  stats->add_option("--annotations", stats_annotations, "Speaker annotations TSV")->required();
  stats->add_option("--bin-width", stats_bin_width, "Histogram bin width in cm")->check(CLI::PositiveNumber);
  stats->add_option("--out", stats_out, "Directory for histogram.csv");
  stats->callback([&] { action = [&] { return cmd_stats(stats_annotations, stats_bin_width, stats_out); }; });

  // train
  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "Fit per-gender regressors (and optionally a gender classifier)");
  add_data_flags(train, train_flags.data, "train");
  train->add_option("--method", train_flags.method, "baseline|mlr|plsr")->capture_default_str();
  train->add_option("--k-range", train_flags.k_range, "PLSR component range A-B")->capture_default_str();
  train->add_option("--validation", train_flags.validation, "Validation embeddings for PLSR component selection");
  train->add_option("--gender-mode", train_flags.gender_mode, "oracle|classifier")->capture_default_str();
  train->add_option("--classifier-train", train_flags.classifier_train, "Embeddings for the gender classifier");
  train->add_flag("--l2-normalize", train_flags.l2_normalize, "L2-normalize embeddings before fitting");
  train->add_option("--out", train_flags.out, "Output directory for model files")->required();
  train->callback([&] { action = [&] { return cmd_train(train_flags); }; });

  // predict
  PredictFlags predict_flags;
  auto* predict_cmd = app.add_subcommand("predict", "Predict heights with trained models");
  add_data_flags(predict_cmd, predict_flags.data, "all");
  predict_cmd->add_option("--models", predict_flags.models, "Directory written by 'train'")->required();
  predict_cmd->add_option("--gender-mode", predict_flags.gender_mode, "oracle|classifier")->capture_default_str();
  predict_cmd->add_option("--gender-routing", predict_flags.routing, "utterance|speaker")->capture_default_str();
  predict_cmd->add_option("--out", predict_flags.out, "Directory for predictions.csv (default stdout)");
  predict_cmd->callback([&] { action = [&] { return cmd_predict(predict_flags); }; });

  // evaluate
  std::string eval_predictions, eval_aggregation = "mean-prediction", eval_out;
  auto* eval = app.add_subcommand("evaluate", "MAE/RMSE/Max Error at utterance and speaker level");
  eval->add_option("--predictions", eval_predictions, "Predictions CSV")->required();
  eval->add_option("--aggregation", eval_aggregation, "mean-prediction|mean-abs-error")->capture_default_str();
  eval->add_option("--out", eval_out, "Directory for report and eCDF files");
  eval->callback([&] { action = [&] { return cmd_evaluate(eval_predictions, eval_aggregation, eval_out); }; });

  // sweep
  SweepFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Validation MAE per PLSR component count");
  add_data_flags(sweep, sweep_flags.data, "train");
  sweep->add_option("--validation", sweep_flags.validation, "Validation embeddings")->required();
  sweep->add_option("--k-range", sweep_flags.k_range, "Component range A-B")->capture_default_str();
  sweep->add_flag("--l2-normalize", sweep_flags.l2_normalize, "L2-normalize embeddings");
  sweep->callback([&] { action = [&] { return cmd_sweep(sweep_flags); }; });

  // ttest
  std::string ttest_a, ttest_b;
  auto* ttest = app.add_subcommand("ttest", "Paired t-test on two aligned error files");
  ttest->add_option("errors_a", ttest_a, "First error file")->required();
  ttest->add_option("errors_b", ttest_b, "Second error file")->required();
  ttest->callback([&] { action = [&] { return cmd_ttest(ttest_a, ttest_b); }; });

  // ecdf
  std::string ecdf_errors, ecdf_out;
  std::optional<double> ecdf_threshold;
  auto* ecdf = app.add_subcommand("ecdf", "Empirical CDF of absolute errors");
  ecdf->add_option("--errors", ecdf_errors, "Absolute errors, one per line")->required();
  ecdf->add_option("--at", ecdf_threshold, "Print F(threshold) instead of the curve");
  ecdf->add_option("--out", ecdf_out, "Directory for ecdf.csv (default stdout)");
  ecdf->callback([&] { action = [&] { return cmd_ecdf(ecdf_errors, ecdf_threshold, ecdf_out); }; });

  // run
  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Train, predict and evaluate one experiment");
  run->add_option("--config", run_flags.config, "Experiment config (key=value)");
  run->add_option("--annotations", run_flags.annotations, "Override: annotations");
  run->add_option("--embeddings", run_flags.embeddings, "Override: embeddings");
  run->add_option("--splits", run_flags.splits, "Override: splits");
  run->add_option("--validation", run_flags.validation, "Override: validation embeddings");
  run->add_option("--method", run_flags.method, "Override: baseline|mlr|plsr");
  run->add_option("--k-range", run_flags.k_range, "Override: PLSR component range A-B");
  run->add_option("--gender-mode", run_flags.gender_mode, "Override: oracle|classifier");
  run->add_option("--classifier-train", run_flags.classifier_train, "Override: classifier embeddings");
  run->add_option("--aggregation", run_flags.aggregation, "Override: mean-prediction|mean-abs-error");
  run->add_flag("--l2-normalize", run_flags.l2_normalize, "Override: L2-normalize embeddings");
  run->add_option("--out", run_flags.out, "Override: output directory");
  run->callback([&] { action = [&] { return cmd_run(run_flags); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    return action();
  } catch (const UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return 2;
  } catch (const PipelineError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
