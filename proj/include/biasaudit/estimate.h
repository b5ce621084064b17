#ifndef BIASAUDIT_ESTIMATE_H_
#define BIASAUDIT_ESTIMATE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasaudit/core.h"
#include "biasaudit/dataset.h"
#include "biasaudit/revision.h"

namespace biasaudit {

struct GenderPrediction {
  std::string caption_id;
  double score_man = 0.0;
  double score_woman = 0.0;
  std::optional<double> score_person;  // only with include_neutral
  GenderClass predicted = GenderClass::kNeutral;
  double margin = 0.0;  // |score_man - score_woman|
};

struct EstimateOptions {
  double tie_epsilon = 1e-9;
  SelectionStrategy strategy = SelectionStrategy::kMaxSim;
  bool include_neutral = false;
  int workers = 1;
};

// Argmax over the man/woman scores; |difference| <= tie_epsilon abstains as
// kNeutral.
GenderClass predict_gender(double score_man, double score_woman, double tie_epsilon);

// Fills the mask with each gender, revises both variants with the context
// and predicts by argmax. The person variant, when requested, is reported but
// does not take part in the prediction.
GenderPrediction estimate_gender(const CaptionRecord& record, const VisualContext* context,
                                 const Sidecars& sidecars, const EstimateOptions& options = {});

struct RecordError {
  std::string caption_id;
  std::string message;
};

struct EstimationReport {
  std::int64_t man = 0;
  std::int64_t woman = 0;
  std::int64_t neutral = 0;
  std::int64_t unmasked_skipped = 0;
  std::optional<double> to_m;
  std::optional<double> to_w;
  std::vector<GenderPrediction> predictions;  // by caption id
  std::vector<RecordError> errors;            // by caption id; excluded above
};

// Runs estimate_gender over every masked record. Unmasked records are only
// counted; records whose keys are missing are reported in `errors` and
// excluded from the counts.
EstimationReport estimation_report(std::span<const CaptionRecord> captions,
                                   const ContextIndex& contexts, const Sidecars& sidecars,
                                   const EstimateOptions& options = {});

}  // namespace biasaudit

#endif  // BIASAUDIT_ESTIMATE_H_
