#ifndef BIASAUDIT_TEXT_SCORE_H_
#define BIASAUDIT_TEXT_SCORE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasaudit/core.h"
#include "biasaudit/revision.h"

namespace biasaudit {

// Text-only input: a sentence plus an externally extracted context keyword.
// JSONL {"id", "text", "keyword"?: str|null, "confidence"?: real|null,
//        "gender"?: "man"|"woman"|null (reference label)}.
struct TextRecord {
  std::string id;
  std::string text;
  std::optional<std::string> keyword;
  std::optional<double> confidence;
  std::optional<GenderClass> gold;
};

// Sorted by id; ids unique.
std::vector<TextRecord> read_text_records(const std::filesystem::path& path);

struct TextScoreOptions {
  // P(c_o) given to a keyword without its own confidence. Confidence 1 would
  // zero the informativeness exponent and disable revision.
  double default_confidence = 0.5;
  double tie_epsilon = 1e-9;
  int workers = 1;
};

struct TextScoreRow {
  std::string id;
  std::optional<std::string> keyword;
  double confidence = 0.0;
  ScoredCaption man;
  ScoredCaption woman;
  GenderClass predicted = GenderClass::kNeutral;
  std::optional<GenderClass> gold;
};

struct TextScoreReport {
  std::vector<TextScoreRow> rows;
  std::optional<double> mean_man;
  std::optional<double> mean_woman;
  std::optional<double> to_m;
  std::optional<double> to_w;
  std::int64_t gold_man = 0;
  std::int64_t gold_woman = 0;
  std::optional<double> gold_to_m;
  std::optional<double> gold_to_w;
};

// Scores "<id>#man" and "<id>#woman" with the keyword as the single context
// object; the corpus ratio is the bias ratio of the two mean scores.
TextScoreReport text_only_score(std::span<const TextRecord> records, const Sidecars& sidecars,
                                const TextScoreOptions& options = {});

}  // namespace biasaudit

#endif  // BIASAUDIT_TEXT_SCORE_H_
