#ifndef BIASAUDIT_REVISION_H_
#define BIASAUDIT_REVISION_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "biasaudit/core.h"
#include "biasaudit/dataset.h"
#include "biasaudit/vectors.h"

namespace biasaudit {

inline constexpr double kProbabilityFloor = 1e-12;

struct LmEntry {
  std::optional<double> mean_token_prob;
  std::vector<double> token_logprobs;
};

// JSONL {"key", "mean_token_prob"} or {"key", "token_logprobs": [..]}, with an
// optional {"_manifest": ..} header. Duplicate keys are errors.
class LmSidecar {
 public:
  static LmSidecar Load(const std::filesystem::path& path);

  // Throws Error(kDuplicateKey) when the key exists, Error(kSchema) when the
  // entry carries neither field or holds values outside their ranges.
  void insert(std::string key, LmEntry entry);

  const LmEntry* find(std::string_view key) const;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::unordered_map<std::string, LmEntry, Hash, std::equal_to<>> entries_;
};

// The caption embedding sidecar holds caption / variant / anchor / object
// vectors; the LM sidecar holds hypothesis probabilities.
struct Sidecars {
  const EmbeddingStore* embeddings = nullptr;
  const LmSidecar* lm = nullptr;
};

// mean_token_prob when present, otherwise the arithmetic mean of
// exp(token_logprobs); floored at kProbabilityFloor. Error(kMissingKey) when
// absent, Error(kSchema) on an empty token list.
double hypothesis_probability(std::string_view key, const LmSidecar& lm);

// [(1 - sim) / (1 + sim)]^(1 - p_object) with sim and p_object clamped to
// [0, 1]. Exactly 1 when p_object == 1; exactly 0 when sim == 1 and p_object < 1.
double alpha(double sim, double p_object);

// p^alpha evaluated as exp(alpha * ln p); exact at alpha 0 and 1 and kept in
// [p, 1].
double revise(double p_hypothesis, double alpha);

enum class SelectionStrategy { kMaxSim, kMeanTopK };

std::string_view to_string(SelectionStrategy s);
std::optional<SelectionStrategy> parse_strategy(std::string_view name);

struct ObjectEvidence {
  std::string label;
  double p_object = 0.0;
  double sim = 0.0;
  double alpha = 1.0;
  double score = 0.0;
};

struct ScoredCaption {
  std::string caption_id;
  GenderClass gender = GenderClass::kNeutral;
  std::string key;  // LM / embedding key of the scored variant
  double p_hypothesis = 1.0;
  std::optional<std::string> object_label;  // the max_sim pick; unset otherwise
  double p_object = 0.0;
  double sim = 0.0;
  double alpha = 1.0;
  double score = 1.0;
  std::vector<ObjectEvidence> evidence;  // every context object, context order
};

// "<id>#man" / "<id>#woman" / "<id>#person" for masked captions, "<id>" else.
std::string variant_key(const CaptionRecord& record, GenderClass g);

// Revises the LM hypothesis for (record, g) with the visual context.
//   max_sim:   the object with the highest sim(variant, object) drives a
//              single revision (ties: higher confidence, then label).
//   mean_topk: every object revises independently; score is their mean,
//              sim and p_object are means and alpha is the effective
//              exponent log(score) / log(p).
// Empty or missing context leaves the hypothesis unrevised (alpha = 1).
ScoredCaption score_caption(const CaptionRecord& record, GenderClass g,
                            const VisualContext* context, const Sidecars& sidecars,
                            SelectionStrategy strategy = SelectionStrategy::kMaxSim);

// Same revision with explicit inputs: the hypothesis probability and the
// vector of the gendered text. Used by the text-only mode.
ScoredCaption score_with_context(std::string caption_id, GenderClass g, std::string key,
                                 double p_hypothesis, const Vector* text_vector,
                                 std::span<const ContextObject> objects,
                                 const EmbeddingStore& embeddings, SelectionStrategy strategy);

struct GenderScoreAggregate {
  GenderClass gender = GenderClass::kMan;
  std::optional<double> mean_score;
  std::int64_t count = 0;
};

// Arithmetic mean of the scores whose gender is `g`, in the given order.
GenderScoreAggregate gender_score(std::span<const ScoredCaption> scored, GenderClass g);

struct ScoreOptions {
  SelectionStrategy strategy = SelectionStrategy::kMaxSim;
  bool include_neutral = false;
  int workers = 1;
};

struct ScoreRun {
  std::vector<ScoredCaption> scored;  // by caption id, then man/woman/neutral
  std::int64_t mixed_skipped = 0;
};

// Masked captions are scored once per filled variant (man, woman, and person
// when include_neutral); unmasked captions once under their own label.
// Unmasked mixed captions are skipped and counted.
ScoreRun score_dataset(std::span<const CaptionRecord> captions, const ContextIndex& contexts,
                       const GenderLexicon& lexicon, const Sidecars& sidecars,
                       const ScoreOptions& options = {});

struct GenderScoreSummary {
  std::array<GenderScoreAggregate, 3> by_gender;  // man, woman, neutral
  std::optional<double> to_m;
  std::optional<double> to_w;
  std::optional<double> man_to_neutral;
  std::optional<double> woman_to_neutral;
};

GenderScoreSummary summarize_scores(std::span<const ScoredCaption> scored);

}  // namespace biasaudit

#endif  // BIASAUDIT_REVISION_H_
