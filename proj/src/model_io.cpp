#include <fstream>
#include <map>

#include <fmt/core.h>

#include "text_util.hpp"
#include "voiceprofile/dataset.hpp"
#include "voiceprofile/regression.hpp"

namespace voiceprofile {

namespace {

std::string join_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ' ';
    out += detail::shortest(v(i));
  }
  return out;
}

Eigen::VectorXd parse_vector(std::string_view text, std::string_view key) {
  std::vector<double> values;
  for (auto tok : detail::split(detail::trim(text), ' ')) {
    if (tok.empty()) continue;
    const auto v = detail::parse_double(tok);
    if (!v) throw Error(ErrorCode::MalformedRow, fmt::format("bad number '{}' in {}", tok, key));
    values.push_back(*v);
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::optional<ModelKind> parse_kind(std::string_view tag) {
  for (ModelKind k : {ModelKind::Ols, ModelKind::Pls, ModelKind::Baseline, ModelKind::Logistic}) {
    if (model_kind_tag(k) == tag) return k;
  }
  return std::nullopt;
}

}  // namespace

std::string model_to_text(const LinearModel& model) {
  std::string out;
  out += fmt::format("kind={}\n", model_kind_tag(model.kind));
  out += fmt::format("dim={}\n", model.dim());
  out += fmt::format("intercept={}\n", detail::shortest(model.intercept));
  out += fmt::format("coefficients={}\n", join_vector(model.coefficients));
  if (model.kind == ModelKind::Pls) {
    out += fmt::format("n_components={}\n", model.n_components);
    if (model.centering_means.size() > 0) out += fmt::format("centering_means={}\n", join_vector(model.centering_means));
  }
  if (model.transform == InputTransform::L2Normalize) out += "transform=l2\n";
  if (model.degenerate) out += "degenerate=1\n";
  if (!model.converged) out += "converged=0\n";
  return out;
}

LinearModel model_from_text(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected key=value", line_no));
    const std::string key(detail::trim(line.substr(0, eq)));
    if (!kv.emplace(key, std::string(line.substr(eq + 1))).second) {
      throw Error(ErrorCode::MalformedRow, fmt::format("line {}: duplicate key '{}'", line_no, key));
    }
  });

  const auto require = [&](std::string_view key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::MalformedRow, fmt::format("missing key '{}'", key));
    return it->second;
  };

  LinearModel m;
  const auto kind = parse_kind(detail::trim(require("kind")));
  if (!kind) throw Error(ErrorCode::MalformedRow, fmt::format("unknown kind '{}'", require("kind")));
  m.kind = *kind;

  const auto dim = detail::parse_int(require("dim"));
  if (!dim || *dim < 0) throw Error(ErrorCode::MalformedRow, "bad dim");
  const auto intercept = detail::parse_double(require("intercept"));
  if (!intercept) throw Error(ErrorCode::MalformedRow, "bad intercept");
  m.intercept = *intercept;
  m.coefficients = parse_vector(require("coefficients"), "coefficients");
  if (m.coefficients.size() != *dim) {
    throw Error(ErrorCode::DimMismatch, fmt::format("expected {}, found {}", *dim, m.coefficients.size()));
  }

  for (const auto& [key, value] : kv) {
    if (key == "kind" || key == "dim" || key == "intercept" || key == "coefficients") continue;
    if (key == "n_components") {
      const auto k = detail::parse_int(value);
      if (!k || *k < 0) throw Error(ErrorCode::MalformedRow, "bad n_components");
      m.n_components = static_cast<int>(*k);
    } else if (key == "centering_means") {
      m.centering_means = parse_vector(value, key);
      if (m.centering_means.size() != *dim) throw Error(ErrorCode::DimMismatch, "centering_means length");
    } else if (key == "transform") {
      const auto t = detail::trim(value);
      if (t == "l2") m.transform = InputTransform::L2Normalize;
      else if (t == "none") m.transform = InputTransform::None;
      else throw Error(ErrorCode::MalformedRow, fmt::format("unknown transform '{}'", t));
    } else if (key == "degenerate") {
      m.degenerate = detail::trim(value) == "1";
    } else if (key == "converged") {
      m.converged = detail::trim(value) != "0";
    } else {
      throw Error(ErrorCode::MalformedRow, fmt::format("unknown key '{}'", key));
    }
  }
  return m;
}

void save_model(const std::filesystem::path& path, const LinearModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  out << model_to_text(model);
  if (!out) throw Error(ErrorCode::Io, fmt::format("write failed for '{}'", path.string()));
}

LinearModel load_model(const std::filesystem::path& path) { return model_from_text(read_text_file(path)); }

}  // namespace voiceprofile
