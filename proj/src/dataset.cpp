#include "voiceprofile/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "text_util.hpp"

namespace voiceprofile {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateSpeaker: return "DuplicateSpeaker";
    case ErrorCode::HeightOutOfRange: return "HeightOutOfRange";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::NonPositive: return "NonPositive";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::UnknownSpeaker: return "UnknownSpeaker";
    case ErrorCode::MissingSplit: return "MissingSplit";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::TooManyComponents: return "TooManyComponents";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::InvalidDf: return "InvalidDf";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NegativeError: return "NegativeError";
    case ErrorCode::MissingGender: return "MissingGender";
    case ErrorCode::EmptyValidation: return "EmptyValidation";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string_view gender_tag(Gender g) noexcept { return g == Gender::Male ? "m" : "f"; }
std::string_view gender_name(Gender g) noexcept { return g == Gender::Male ? "male" : "female"; }

std::optional<Gender> parse_gender(std::string_view tag) noexcept {
  if (tag == "m" || tag == "male") return Gender::Male;
  if (tag == "f" || tag == "female") return Gender::Female;
  return std::nullopt;
}

std::string_view split_name(Split s) noexcept { return s == Split::Train ? "train" : "test"; }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

// ---------------------------------------------------------------------------
// Annotations and splits

std::vector<SpeakerAnnotation> parse_annotations(std::string_view text) {
  std::vector<SpeakerAnnotation> out;
  std::set<std::string, std::less<>> seen;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3 || fields[0].empty()) {
      throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected speaker_id<TAB>gender<TAB>height_cm", line_no));
    }
    const auto gender = parse_gender(fields[1]);
    const auto height = detail::parse_double(fields[2]);
    if (!gender || !height) {
      throw Error(ErrorCode::MalformedRow, fmt::format("line {}: bad gender or height", line_no));
    }
    std::string id(fields[0]);
    if (!(*height >= kMinHeightCm && *height <= kMaxHeightCm)) {
      throw Error(ErrorCode::HeightOutOfRange, fmt::format("{} has height {}", id, fields[2]));
    }
    if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateSpeaker, id);
    out.push_back({std::move(id), *gender, *height});
  });
  return out;
}

std::vector<SpeakerAnnotation> load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_text_file(path));
}

std::vector<SplitAssignment> parse_splits(std::string_view text) {
  std::vector<SplitAssignment> out;
  std::set<std::string, std::less<>> seen;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2 || fields[0].empty() || (fields[1] != "train" && fields[1] != "test")) {
      throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected speaker_id<TAB>train|test", line_no));
    }
    std::string id(fields[0]);
    if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateSpeaker, id);
    out.push_back({std::move(id), fields[1] == "train" ? Split::Train : Split::Test});
  });
  return out;
}

std::vector<SplitAssignment> load_splits(const std::filesystem::path& path) {
  return parse_splits(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Statistics

namespace {

std::vector<double> heights_of(const std::vector<SpeakerAnnotation>& annotations, Gender gender) {
  std::vector<double> h;
  for (const auto& a : annotations)
    if (a.gender == gender) h.push_back(a.height_cm);
  if (h.empty()) throw Error(ErrorCode::EmptyGroup, fmt::format("no {} speakers", gender_name(gender)));
  return h;
}

}  // namespace

GenderStats compute_gender_stats(const std::vector<SpeakerAnnotation>& annotations, Gender gender) {
  auto h = heights_of(annotations, gender);
  std::sort(h.begin(), h.end());

  GenderStats s;
  s.count = h.size();
  s.min = h.front();
  s.max = h.back();
  const std::size_t mid = h.size() / 2;
  s.median = h.size() % 2 == 1 ? h[mid] : 0.5 * (h[mid - 1] + h[mid]);

  double sum = 0.0;
  for (double v : h) sum += v;
  s.mean = sum / static_cast<double>(h.size());
  double ss = 0.0;
  for (double v : h) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(h.size()));
  return s;
}

std::vector<HistogramBin> histogram(const std::vector<SpeakerAnnotation>& annotations, Gender gender,
                                    double bin_width_cm) {
  if (!(bin_width_cm > 0.0) || !std::isfinite(bin_width_cm)) {
    throw Error(ErrorCode::InvalidArgument, "bin width must be positive");
  }
  const auto h = heights_of(annotations, gender);
  const double anchor = std::floor(*std::min_element(h.begin(), h.end()) / bin_width_cm) * bin_width_cm;

  std::map<long long, std::size_t> counts;
  for (double v : h) ++counts[static_cast<long long>(std::floor((v - anchor) / bin_width_cm))];

  std::vector<HistogramBin> bins;
  bins.reserve(counts.size());
  for (const auto& [idx, n] : counts) bins.push_back({anchor + static_cast<double>(idx) * bin_width_cm, n});
  return bins;
}

double inches_to_cm(double inches) {
  if (!(inches > 0.0)) throw Error(ErrorCode::NonPositive, fmt::format("{} in", inches));
  return inches * 2.54;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::join(std::vector<SpeakerAnnotation> annotations, std::vector<EmbeddingRecord> embeddings,
                      std::vector<SplitAssignment> splits) {
  Dataset ds;
  for (auto& a : annotations) {
    const std::string id = a.speaker_id;
    if (!ds.annotations_.emplace(id, std::move(a)).second) throw Error(ErrorCode::DuplicateSpeaker, id);
  }
  for (auto& s : splits) {
    if (!ds.splits_.emplace(s.speaker_id, s.split).second) throw Error(ErrorCode::DuplicateSpeaker, s.speaker_id);
  }
  if (!embeddings.empty()) ds.dim_ = embeddings.front().dim();
  for (const auto& e : embeddings) {
    if (e.dim() != ds.dim_) {
      throw Error(ErrorCode::DimMismatch, fmt::format("expected {}, found {} ({})", ds.dim_, e.dim(), e.utterance_id));
    }
    if (!ds.annotations_.contains(e.speaker_id)) {
      throw Error(ErrorCode::UnknownSpeaker, fmt::format("{} (utterance {})", e.speaker_id, e.utterance_id));
    }
  }
  ds.embeddings_ = std::move(embeddings);
  return ds;
}

const SpeakerAnnotation& Dataset::annotation(const std::string& speaker_id) const {
  const auto it = annotations_.find(speaker_id);
  if (it == annotations_.end()) throw Error(ErrorCode::UnknownSpeaker, speaker_id);
  return it->second;
}

std::optional<Split> Dataset::split_of(const std::string& speaker_id) const {
  const auto it = splits_.find(speaker_id);
  if (it == splits_.end()) return std::nullopt;
  return it->second;
}

Dataset Dataset::select(Split split) const {
  Dataset out;
  out.annotations_ = annotations_;
  out.splits_ = splits_;
  out.dim_ = dim_;
  for (const auto& e : embeddings_) {
    const auto s = split_of(e.speaker_id);
    if (!s) throw Error(ErrorCode::MissingSplit, e.speaker_id);
    if (*s == split) out.embeddings_.push_back(e);
  }
  return out;
}

std::vector<const EmbeddingRecord*> Dataset::utterances_of(Gender g) const {
  std::vector<const EmbeddingRecord*> out;
  for (const auto& e : embeddings_)
    if (annotation(e.speaker_id).gender == g) out.push_back(&e);
  return out;
}

// ---------------------------------------------------------------------------
// Embedding files

namespace {

template <class T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    const auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::TruncatedFile, fmt::format("{} bytes short reading {} at offset {}",
                                                        n - (bytes_.size() - pos_), what, pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void check_records(const std::vector<EmbeddingRecord>& records) {
  if (records.empty()) return;
  const std::size_t dim = records.front().dim();
  if (dim == 0) throw Error(ErrorCode::DimMismatch, "embedding dimension must be positive");
  for (const auto& r : records) {
    if (r.dim() != dim) throw Error(ErrorCode::DimMismatch, fmt::format("expected {}, found {}", dim, r.dim()));
    for (float v : r.vector)
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, r.utterance_id);
  }
}

void write_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, fmt::format("write failed for '{}'", path.string()));
}

}  // namespace

std::string encode_embeddings(const std::vector<EmbeddingRecord>& records) {
  check_records(records);
  const std::uint32_t dim = records.empty() ? 0 : static_cast<std::uint32_t>(records.front().dim());

  std::string out(kEmbeddingMagic, 4);
  put_le<std::uint32_t>(out, kEmbeddingVersion);
  put_le<std::uint32_t>(out, dim);
  put_le<std::uint64_t>(out, records.size());
  for (const auto& r : records) {
    for (const std::string* id : {&r.utterance_id, &r.speaker_id}) {
      if (id->size() > 0xFFFF) throw Error(ErrorCode::InvalidArgument, "identifier longer than 65535 bytes");
      put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id->size()));
      out += *id;
    }
    for (float v : r.vector) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<EmbeddingRecord> decode_embeddings(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kEmbeddingMagic, 4)) {
    throw Error(ErrorCode::BadMagic, "missing HCEB header");
  }
  ByteReader in(bytes.substr(4));
  const auto version = in.get<std::uint32_t>("version");
  if (version != kEmbeddingVersion) throw Error(ErrorCode::BadMagic, fmt::format("unsupported version {}", version));
  const auto dim = in.get<std::uint32_t>("dim");
  const auto count = in.get<std::uint64_t>("record count");
  if (count > 0 && dim == 0) throw Error(ErrorCode::DimMismatch, "records with zero dimension");

  std::vector<EmbeddingRecord> records;
  records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, bytes.size())));
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord r;
    r.utterance_id = std::string(in.take(in.get<std::uint16_t>("utterance id length"), "utterance id"));
    r.speaker_id = std::string(in.take(in.get<std::uint16_t>("speaker id length"), "speaker id"));
    r.vector.resize(dim);
    for (auto& v : r.vector) {
      v = std::bit_cast<float>(in.get<std::uint32_t>("vector"));
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, r.utterance_id);
    }
    records.push_back(std::move(r));
  }
  if (!in.done()) throw Error(ErrorCode::MalformedRow, "trailing bytes after last record");
  return records;
}

std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_text_file(path));
}

void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records) {
  write_bytes(path, encode_embeddings(records));
}

std::vector<EmbeddingRecord> read_embeddings_tsv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<EmbeddingRecord> records;
  std::size_t dim = 0;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() < 3 || fields[0].empty() || fields[1].empty()) {
      throw Error(ErrorCode::MalformedRow, fmt::format("line {}", line_no));
    }
    EmbeddingRecord r{std::string(fields[0]), std::string(fields[1]), {}};
    r.vector.reserve(fields.size() - 2);
    for (std::size_t i = 2; i < fields.size(); ++i) {
      float v = 0.0f;
      const auto f = fields[i];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
        throw Error(ErrorCode::MalformedRow, fmt::format("line {}: bad value '{}'", line_no, f));
      }
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, fmt::format("line {}", line_no));
      r.vector.push_back(v);
    }
    if (records.empty()) dim = r.dim();
    if (r.dim() != dim) {
      throw Error(ErrorCode::DimMismatch, fmt::format("line {}: expected {}, found {}", line_no, dim, r.dim()));
    }
    records.push_back(std::move(r));
  });
  return records;
}

void write_embeddings_tsv(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records) {
  check_records(records);
  std::string out;
  for (const auto& r : records) {
    out += r.utterance_id;
    out += '\t';
    out += r.speaker_id;
    for (float v : r.vector) {
      out += '\t';
      out += detail::shortest(v);
    }
    out += '\n';
  }
  write_bytes(path, out);
}

std::vector<EmbeddingRecord> read_embeddings_any(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? read_embeddings_tsv(path) : read_embeddings(path);
}

}  // namespace voiceprofile
