#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "voiceprofile/error.hpp"

namespace voiceprofile {

enum class Gender { Male, Female };

std::string_view gender_tag(Gender g) noexcept;   // "m" / "f"
std::string_view gender_name(Gender g) noexcept;  // "male" / "female"
std::optional<Gender> parse_gender(std::string_view tag) noexcept;

inline constexpr Gender kGenders[] = {Gender::Male, Gender::Female};

inline constexpr double kMinHeightCm = 100.0;
inline constexpr double kMaxHeightCm = 250.0;

struct SpeakerAnnotation {
  std::string speaker_id;
  Gender gender = Gender::Male;
  double height_cm = 0.0;

  friend bool operator==(const SpeakerAnnotation&, const SpeakerAnnotation&) = default;
};

struct EmbeddingRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::vector<float> vector;

  std::size_t dim() const noexcept { return vector.size(); }

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

enum class Split { Train, Test };

std::string_view split_name(Split s) noexcept;

struct SplitAssignment {
  std::string speaker_id;
  Split split = Split::Train;
};

struct GenderStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population (divisor N)
  double min = 0.0;
  double max = 0.0;
};

struct HistogramBin {
  double left_cm = 0.0;
  std::size_t count = 0;

  friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

/// Annotations, embeddings and splits joined by speaker id.
///
/// Construct through Dataset::join, which checks that every embedding's
/// speaker is annotated and that all vectors share one dimension.
class Dataset {
 public:
  static Dataset join(std::vector<SpeakerAnnotation> annotations,
                      std::vector<EmbeddingRecord> embeddings,
                      std::vector<SplitAssignment> splits = {});

  const std::map<std::string, SpeakerAnnotation>& annotations() const noexcept { return annotations_; }
  const std::vector<EmbeddingRecord>& embeddings() const noexcept { return embeddings_; }
  const std::map<std::string, Split>& splits() const noexcept { return splits_; }

  const SpeakerAnnotation& annotation(const std::string& speaker_id) const;
  std::optional<Split> split_of(const std::string& speaker_id) const;

  /// Embedding dimension; 0 when there are no embeddings.
  std::size_t dim() const noexcept { return dim_; }

  /// Utterances whose speaker belongs to `split`. Speakers absent from the
  /// split table raise MissingSplit.
  Dataset select(Split split) const;

  /// Utterances of speakers with the given gender.
  std::vector<const EmbeddingRecord*> utterances_of(Gender g) const;

 private:
  std::map<std::string, SpeakerAnnotation> annotations_;
  std::vector<EmbeddingRecord> embeddings_;
  std::map<std::string, Split> splits_;
  std::size_t dim_ = 0;
};

std::vector<SpeakerAnnotation> parse_annotations(std::string_view text);
std::vector<SpeakerAnnotation> load_annotations(const std::filesystem::path& path);

std::vector<SplitAssignment> parse_splits(std::string_view text);
std::vector<SplitAssignment> load_splits(const std::filesystem::path& path);

GenderStats compute_gender_stats(const std::vector<SpeakerAnnotation>& annotations, Gender gender);

/// Fixed-width histogram. Bins are [left, left + width), anchored at
/// floor(min / width) * width; empty bins are omitted.
std::vector<HistogramBin> histogram(const std::vector<SpeakerAnnotation>& annotations, Gender gender,
                                    double bin_width_cm);

double inches_to_cm(double inches);

// Binary embedding container: "HCEB", u32 version, u32 dim, u64 count, then
// per record u16-prefixed utterance id, u16-prefixed speaker id and dim f32.
// All integers and floats little-endian.
inline constexpr char kEmbeddingMagic[4] = {'H', 'C', 'E', 'B'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);

std::vector<EmbeddingRecord> decode_embeddings(std::string_view bytes);
std::string encode_embeddings(const std::vector<EmbeddingRecord>& records);

std::vector<EmbeddingRecord> read_embeddings_tsv(const std::filesystem::path& path);
void write_embeddings_tsv(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);

/// Dispatches on extension: ".tsv" reads the text form, anything else binary.
std::vector<EmbeddingRecord> read_embeddings_any(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace voiceprofile
