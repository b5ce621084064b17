#include "biasaudit/context.h"

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace biasaudit {

namespace {

bool names_a_person(const std::string& label, const GenderLexicon& lexicon) {
  const auto tokens = tokenize(label);
  return std::any_of(tokens.begin(), tokens.end(),
                     [&](const std::string& t) { return lexicon.contains(t); });
}

std::string lowercase_key(const std::string& label) {
  std::string out;
  for (const auto& t : tokenize(label)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace

VisualContext filter_context(const VisualContext& candidates, const EmbeddingStore& store,
                             const GenderLexicon& lexicon, const ContextFilterOptions& options,
                             Diagnostics* diag) {
  if (options.conf_threshold < 0.0 || options.conf_threshold > 1.0 ||
      options.vote_threshold < 0.0 || options.vote_threshold > 1.0 || options.k == 0) {
    throw Error(ErrorCode::kDomain, "filter_context: thresholds must lie in [0, 1] and k >= 1");
  }

  std::vector<ContextObject> pool;
  for (const auto& o : candidates.objects) {
    if (o.confidence < options.conf_threshold) continue;
    if (names_a_person(o.label, lexicon)) continue;
    pool.push_back(o);
  }
  std::sort(pool.begin(), pool.end(), [](const ContextObject& a, const ContextObject& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.label != b.label) return a.label < b.label;
    return a.classifier < b.classifier;
  });

  struct Kept {
    std::string key;
    std::optional<Vector> vec;
  };
  std::vector<Kept> kept;
  std::set<std::string> reported;
  VisualContext out{candidates.image_id, {}};

  for (const auto& o : pool) {
    if (out.objects.size() == options.k) break;
    const auto key = lowercase_key(o.label);
    auto vec = embed_phrase(o.label, store);
    if (!vec && diag != nullptr && reported.insert(o.label).second) {
      diag->warn("coverage", "image '" + candidates.image_id + "': no vector for label '" +
                                 o.label + "', voting skipped");
    }
    bool absorbed = false;
    for (const auto& k : kept) {
      if (k.key == key) {
        absorbed = true;
      } else if (vec && k.vec) {
        try {
          absorbed = cosine(*vec, *k.vec) >= options.vote_threshold;
        } catch (const Error&) {
          // zero-norm label vector: no similarity, no absorption
        }
      }
      if (absorbed) break;
    }
    if (absorbed) continue;
    kept.push_back({key, std::move(vec)});
    out.objects.push_back(o);
  }
  return out;
}

}  // namespace biasaudit
