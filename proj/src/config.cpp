#include <set>

#include <fmt/core.h>

#include "text_util.hpp"
#include "voiceprofile/pipeline.hpp"

namespace voiceprofile {

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::Baseline: return "baseline";
    case Method::Mlr: return "mlr";
    case Method::Plsr: return "plsr";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view s) noexcept {
  if (s == "baseline") return Method::Baseline;
  if (s == "mlr") return Method::Mlr;
  if (s == "plsr") return Method::Plsr;
  return std::nullopt;
}

std::string_view gender_mode_name(GenderMode m) noexcept { return m == GenderMode::Oracle ? "oracle" : "classifier"; }

std::optional<GenderMode> parse_gender_mode(std::string_view s) noexcept {
  if (s == "oracle") return GenderMode::Oracle;
  if (s == "classifier") return GenderMode::Classifier;
  return std::nullopt;
}

std::optional<KRange> parse_k_range(std::string_view s) noexcept {
  s = detail::trim(s);
  const auto dash = s.find('-');
  const auto first = detail::parse_int(s.substr(0, dash));
  const auto last = dash == std::string_view::npos ? first : detail::parse_int(s.substr(dash + 1));
  if (!first || !last || *first < 1 || *last < *first || *last > 1'000'000) return std::nullopt;
  return KRange{static_cast<int>(*first), static_cast<int>(*last)};
}

std::string DatasetSpec::describe() const {
  return fmt::format("{} [{}]", embeddings.filename().string(), split ? split_name(*split) : std::string_view("all"));
}

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap kv;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') return;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw PipelineError("config-validate", fmt::format("line {}: expected key=value", line_no));
    }
    kv[std::string(detail::trim(line.substr(0, eq)))] = std::string(detail::trim(line.substr(eq + 1)));
  });
  return kv;
}

namespace {

const std::set<std::string, std::less<>> kDatasetFields = {"annotations", "embeddings", "splits", "split"};
const std::set<std::string, std::less<>> kPrefixes = {"train", "test", "validation", "classifier_train"};
const std::set<std::string, std::less<>> kScalarKeys = {"annotations",    "embeddings", "splits",           "method",
                                                        "k_range",        "gender_mode", "gender_routing",   "aggregation",
                                                        "l2_normalize",   "out",         "compare_baseline"};

[[noreturn]] void invalid(const std::string& message) { throw PipelineError("config-validate", message); }

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  invalid(fmt::format("{}: expected a boolean, got '{}'", key, v));
}

std::optional<std::string_view> lookup(const ConfigMap& kv, std::string_view key) {
  const auto it = kv.find(key);
  if (it == kv.end() || it->second.empty()) return std::nullopt;
  return std::string_view(it->second);
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

bool has_prefix_keys(const ConfigMap& kv, std::string_view prefix) {
  for (const auto& field : kDatasetFields) {
    if (kv.contains(fmt::format("{}_{}", prefix, field))) return true;
  }
  return false;
}

DatasetSpec dataset_spec(const ConfigMap& kv, std::string_view prefix, const std::filesystem::path& base,
                         std::optional<Split> default_split) {
  DatasetSpec spec;
  auto field = [&](std::string_view name) -> std::optional<std::string_view> {
    if (auto v = lookup(kv, fmt::format("{}_{}", prefix, name))) return v;
    return lookup(kv, name);
  };
  if (auto v = field("annotations")) spec.annotations = resolve(base, *v);
  if (auto v = field("embeddings")) spec.embeddings = resolve(base, *v);
  if (auto v = field("splits")) spec.splits = resolve(base, *v);
  spec.split = default_split;
  if (auto v = lookup(kv, fmt::format("{}_split", prefix))) {
    if (*v == "train") spec.split = Split::Train;
    else if (*v == "test") spec.split = Split::Test;
    else if (*v == "all") spec.split = std::nullopt;
    else invalid(fmt::format("{}_split: expected train|test|all, got '{}'", prefix, *v));
  }
  return spec;
}

void check_spec(const DatasetSpec& spec, std::string_view role) {
  if (spec.annotations.empty()) invalid(fmt::format("{} set has no annotations path", role));
  if (spec.embeddings.empty()) invalid(fmt::format("{} set has no embeddings path", role));
  if (spec.split && spec.splits.empty()) invalid(fmt::format("{} set selects a split but has no splits file", role));
}

}  // namespace

ExperimentConfig config_from_map(const ConfigMap& kv, const std::filesystem::path& base_dir) {
  for (const auto& [key, value] : kv) {
    if (kScalarKeys.contains(key)) continue;
    bool known = false;
    for (const auto& prefix : kPrefixes) {
      if (key.size() > prefix.size() + 1 && key.starts_with(prefix) && key[prefix.size()] == '_' &&
          kDatasetFields.contains(std::string_view(key).substr(prefix.size() + 1))) {
        known = true;
      }
    }
    if (!known) invalid(fmt::format("unknown key '{}'", key));
  }

  ExperimentConfig c;
  c.train = dataset_spec(kv, "train", base_dir, Split::Train);
  c.test = dataset_spec(kv, "test", base_dir, Split::Test);
  if (has_prefix_keys(kv, "validation")) c.validation = dataset_spec(kv, "validation", base_dir, std::nullopt);
  if (has_prefix_keys(kv, "classifier_train")) {
    c.classifier_train = dataset_spec(kv, "classifier_train", base_dir, Split::Train);
  }

  if (auto v = lookup(kv, "method")) {
    const auto m = parse_method(*v);
    if (!m) invalid(fmt::format("method: expected baseline|mlr|plsr, got '{}'", *v));
    c.method = *m;
  }
  if (auto v = lookup(kv, "k_range")) {
    const auto r = parse_k_range(*v);
    if (!r) invalid(fmt::format("k_range: expected A-B with 1 <= A <= B, got '{}'", *v));
    c.k_range = *r;
  }
  if (auto v = lookup(kv, "gender_mode")) {
    const auto m = parse_gender_mode(*v);
    if (!m) invalid(fmt::format("gender_mode: expected oracle|classifier, got '{}'", *v));
    c.gender_mode = *m;
  }
  if (auto v = lookup(kv, "gender_routing")) {
    if (*v == "utterance") c.routing = Routing::Utterance;
    else if (*v == "speaker") c.routing = Routing::Speaker;
    else invalid(fmt::format("gender_routing: expected utterance|speaker, got '{}'", *v));
  }
  if (auto v = lookup(kv, "aggregation")) {
    const auto a = parse_aggregation(*v);
    if (!a) invalid(fmt::format("aggregation: expected mean-prediction|mean-abs-error, got '{}'", *v));
    c.aggregation = *a;
  }
  if (auto v = lookup(kv, "l2_normalize")) c.l2_normalize = parse_bool("l2_normalize", *v);
  if (auto v = lookup(kv, "compare_baseline")) c.compare_baseline = parse_bool("compare_baseline", *v);
  if (auto v = lookup(kv, "out")) c.out = resolve(base_dir, *v);

  validate_config(c);
  return c;
}

void validate_config(const ExperimentConfig& c) {
  check_spec(c.train, "train");
  check_spec(c.test, "test");
  if (c.validation) check_spec(*c.validation, "validation");
  if (c.classifier_train) check_spec(*c.classifier_train, "classifier_train");
  if (c.method == Method::Plsr && !c.validation) invalid("method plsr requires a validation set (validation_* keys)");
  if (c.k_range.first < 1 || c.k_range.last < c.k_range.first) invalid("k_range is empty");
}

}  // namespace voiceprofile
