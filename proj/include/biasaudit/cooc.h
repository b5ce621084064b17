#ifndef BIASAUDIT_COOC_H_
#define BIASAUDIT_COOC_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "biasaudit/core.h"
#include "biasaudit/revision.h"

namespace biasaudit {

struct CoocCounts {
  std::int64_t man = 0;
  std::int64_t woman = 0;
  std::int64_t neutral = 0;
  std::int64_t mixed = 0;
  std::int64_t masked = 0;  // <MASK> templates, never labeled

  std::optional<double> to_m() const;
  std::optional<double> to_w() const;
};

// Word-boundary match of a (possibly multi-word) label in a caption,
// case-insensitive: the label's tokens must appear contiguously.
bool mentions_object(std::string_view text, std::string_view label);

// Gender label counts over the captions, restricted to captions mentioning
// `object_filter` when given.
CoocCounts cooc_counts(std::span<const CaptionRecord> captions, const GenderLexicon& lexicon,
                       std::optional<std::string_view> object_filter = std::nullopt);

// Mean over images of the per-image to-m ratio of their captions (each
// reference labeled independently). Images without a man/woman caption are
// left out; nullopt when no image qualifies.
std::optional<double> per_image_to_m(std::span<const CaptionRecord> captions,
                                     const GenderLexicon& lexicon);

enum class BiasMethod { kCooc, kGenderScore };

struct BiasRatio {
  std::optional<double> to_m;
  std::optional<double> to_w;
};

// Bias ratio for one object, over co-occurrence counts (kCooc) or over the
// summed man / woman scores of the scored captions mentioning it
// (kGenderScore, which needs `scored`).
BiasRatio per_object_bias(std::span<const CaptionRecord> captions, const GenderLexicon& lexicon,
                          std::string_view object, BiasMethod method,
                          std::span<const ScoredCaption> scored = {});

// model_count / human_count; nullopt when human_count is zero.
std::optional<double> leakage(std::int64_t model_count, std::int64_t human_count);

}  // namespace biasaudit

#endif  // BIASAUDIT_COOC_H_
