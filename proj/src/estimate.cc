#include "biasaudit/estimate.h"

#include <algorithm>
#include <cmath>

#include "biasaudit/distance.h"
#include "biasaudit/parallel.h"

namespace biasaudit {

GenderClass predict_gender(double score_man, double score_woman, double tie_epsilon) {
  if (std::abs(score_man - score_woman) <= tie_epsilon) return GenderClass::kNeutral;
  return score_man > score_woman ? GenderClass::kMan : GenderClass::kWoman;
}

GenderPrediction estimate_gender(const CaptionRecord& record, const VisualContext* context,
                                 const Sidecars& sidecars, const EstimateOptions& options) {
  if (!record.mask_present()) {
    throw Error(ErrorCode::kSchema, "caption '" + record.id + "' has no <MASK> to estimate");
  }
  GenderPrediction p;
  p.caption_id = record.id;
  p.score_man = score_caption(record, GenderClass::kMan, context, sidecars, options.strategy).score;
  p.score_woman =
      score_caption(record, GenderClass::kWoman, context, sidecars, options.strategy).score;
  if (options.include_neutral) {
    p.score_person =
        score_caption(record, GenderClass::kNeutral, context, sidecars, options.strategy).score;
  }
  p.margin = std::abs(p.score_man - p.score_woman);
  p.predicted = predict_gender(p.score_man, p.score_woman, options.tie_epsilon);
  return p;
}

EstimationReport estimation_report(std::span<const CaptionRecord> captions,
                                   const ContextIndex& contexts, const Sidecars& sidecars,
                                   const EstimateOptions& options) {
  EstimationReport report;
  std::vector<const CaptionRecord*> order;
  for (const auto& c : captions) {
    if (c.mask_present()) {
      order.push_back(&c);
    } else {
      ++report.unmasked_skipped;
    }
  }
  std::sort(order.begin(), order.end(),
            [](const CaptionRecord* a, const CaptionRecord* b) { return a->id < b->id; });

  std::vector<std::optional<GenderPrediction>> results(order.size());
  std::vector<std::string> failures(order.size());
  parallel_for(order.size(), options.workers, [&](std::size_t i) {
    try {
      results[i] = estimate_gender(*order[i], contexts.find(order[i]->image_id), sidecars, options);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!results[i]) {
      report.errors.push_back({order[i]->id, failures[i]});
      continue;
    }
    switch (results[i]->predicted) {
      case GenderClass::kMan: ++report.man; break;
      case GenderClass::kWoman: ++report.woman; break;
      default: ++report.neutral; break;
    }
    report.predictions.push_back(std::move(*results[i]));
  }
  report.to_m = bias_ratio_to_m(static_cast<double>(report.man), static_cast<double>(report.woman));
  report.to_w = bias_ratio_to_m(static_cast<double>(report.woman), static_cast<double>(report.man));
  return report;
}

}  // namespace biasaudit
