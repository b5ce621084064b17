#include "biasaudit/cooc.h"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "biasaudit/distance.h"

namespace biasaudit {

std::optional<double> CoocCounts::to_m() const {
  return bias_ratio_to_m(static_cast<double>(man), static_cast<double>(woman));
}

std::optional<double> CoocCounts::to_w() const {
  return bias_ratio_to_m(static_cast<double>(woman), static_cast<double>(man));
}

bool mentions_object(std::string_view text, std::string_view label) {
  const auto needle = tokenize(label);
  if (needle.empty()) return false;
  const auto hay = tokenize(text);
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

CoocCounts cooc_counts(std::span<const CaptionRecord> captions, const GenderLexicon& lexicon,
                       std::optional<std::string_view> object_filter) {
  CoocCounts counts;
  for (const auto& c : captions) {
    if (c.mask_present()) {
      ++counts.masked;
      continue;
    }
    if (object_filter && !mentions_object(c.text, *object_filter)) continue;
    switch (label_caption_gender(c.text, lexicon)) {
      case GenderClass::kMan: ++counts.man; break;
      case GenderClass::kWoman: ++counts.woman; break;
      case GenderClass::kNeutral: ++counts.neutral; break;
      case GenderClass::kMixed: ++counts.mixed; break;
    }
  }
  return counts;
}

std::optional<double> per_image_to_m(std::span<const CaptionRecord> captions,
                                     const GenderLexicon& lexicon) {
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> per_image;
  for (const auto& c : captions) {
    if (c.mask_present()) continue;
    const auto g = label_caption_gender(c.text, lexicon);
    auto& [m, w] = per_image[c.image_id];
    if (g == GenderClass::kMan) ++m;
    if (g == GenderClass::kWoman) ++w;
  }
  double sum = 0.0;
  std::int64_t images = 0;
  for (const auto& [image, mw] : per_image) {
    const auto r = bias_ratio_to_m(static_cast<double>(mw.first), static_cast<double>(mw.second));
    if (!r) continue;
    sum += *r;
    ++images;
  }
  if (images == 0) return std::nullopt;
  return sum / static_cast<double>(images);
}

BiasRatio per_object_bias(std::span<const CaptionRecord> captions, const GenderLexicon& lexicon,
                          std::string_view object, BiasMethod method,
                          std::span<const ScoredCaption> scored) {
  double s_m = 0.0;
  double s_w = 0.0;
  if (method == BiasMethod::kCooc) {
    const auto counts = cooc_counts(captions, lexicon, object);
    s_m = static_cast<double>(counts.man);
    s_w = static_cast<double>(counts.woman);
  } else {
    std::unordered_map<std::string_view, const CaptionRecord*> by_id;
    for (const auto& c : captions) by_id.emplace(c.id, &c);
    for (const auto& s : scored) {
      auto it = by_id.find(s.caption_id);
      if (it == by_id.end() || !mentions_object(it->second->text, object)) continue;
      if (s.gender == GenderClass::kMan) s_m += s.score;
      if (s.gender == GenderClass::kWoman) s_w += s.score;
    }
  }
  return {bias_ratio_to_m(s_m, s_w), bias_ratio_to_m(s_w, s_m)};
}

std::optional<double> leakage(std::int64_t model_count, std::int64_t human_count) {
  if (model_count < 0 || human_count < 0) {
    throw Error(ErrorCode::kDomain, "leakage: counts must be non-negative");
  }
  if (human_count == 0) return std::nullopt;
  return static_cast<double>(model_count) / static_cast<double>(human_count);
}

}  // namespace biasaudit
