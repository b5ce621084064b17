#ifndef BIASAUDIT_DISTANCE_H_
#define BIASAUDIT_DISTANCE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biasaudit/core.h"
#include "biasaudit/dataset.h"
#include "biasaudit/diagnostics.h"
#include "biasaudit/vectors.h"

namespace biasaudit {

// s_m / (s_m + s_w). nullopt when both are zero; Error(kDomain) on negatives.
// The smaller share is divided out directly and the larger one is its
// complement, so ratio(a, b) + ratio(b, a) == 1 holds exactly.
std::optional<double> bias_ratio_to_m(double s_m, double s_w);

// s_gender / s_person. nullopt when s_person is zero; Error(kDomain) on
// negatives.
std::optional<double> ratio_to_neutral(double s_gender, double s_person);

// Cosine between the canonical lexicon term of `g` and the object label
// (multi-word labels average their token vectors), negatives clamped to 0.
// nullopt when either side is out of vocabulary.
std::optional<double> word_distance(std::string_view object_label, GenderClass g,
                                    const GenderLexicon& lexicon, const EmbeddingStore& store);

// Cosine between the anchor phrase of `g` and the caption vector stored under
// `caption_key`, negatives clamped to 0. nullopt when either key is missing.
std::optional<double> sentence_distance(std::string_view caption_key, GenderClass g,
                                        const EmbeddingStore& sidecar,
                                        const GenderLexicon& lexicon);

struct MeanAccumulator {
  double sum = 0.0;
  std::int64_t count = 0;

  void add(double x) {
    sum += x;
    ++count;
  }
  std::optional<double> mean() const {
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
  }
};

struct GenderDistanceRow {
  std::string subject;
  MeanAccumulator person;
  MeanAccumulator man;
  MeanAccumulator woman;
};

struct RowRatios {
  std::optional<double> to_m;
  std::optional<double> to_w;
  std::optional<double> man_to_neutral;
  std::optional<double> woman_to_neutral;
};

RowRatios ratios_of(const GenderDistanceRow& row);

enum class DistanceLevel { kWord, kSentence };

std::string_view to_string(DistanceLevel level);

struct RankedObject {
  std::string label;
  double score = 0.0;
};

struct DistanceTable {
  DistanceLevel level = DistanceLevel::kWord;
  GenderDistanceRow corpus{"corpus", {}, {}, {}};
  std::vector<GenderDistanceRow> rows;  // one per object label, ascending
  // Objects by descending mean similarity per class (man, woman, neutral).
  std::array<std::vector<RankedObject>, 3> ranking;
  std::int64_t scored = 0;
  std::int64_t skipped = 0;
  std::int64_t mixed_captions = 0;
  std::int64_t masked_captions = 0;
};

struct DistanceOptions {
  DistanceLevel level = DistanceLevel::kWord;
  std::size_t top_n = 10;
  int workers = 1;
};

// Averages gender-object similarity over every (caption, context object)
// pair. Man/woman columns draw on captions labeled with that gender; the
// person column draws on every non-mixed caption. Mixed captions and
// <MASK> templates are excluded. `store` holds word vectors (word level) or
// the sentence embedding sidecar (sentence level). Missing vectors skip the pair and are
// counted in `skipped`, with one coverage warning per missing key.
DistanceTable aggregate_distance_table(std::span<const CaptionRecord> captions,
                                       const ContextIndex& contexts, const GenderLexicon& lexicon,
                                       const EmbeddingStore& store,
                                       const DistanceOptions& options = {},
                                       Diagnostics* diag = nullptr);

}  // namespace biasaudit

#endif  // BIASAUDIT_DISTANCE_H_
