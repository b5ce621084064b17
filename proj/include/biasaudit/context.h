#ifndef BIASAUDIT_CONTEXT_H_
#define BIASAUDIT_CONTEXT_H_

#include <cstddef>

#include "biasaudit/core.h"
#include "biasaudit/diagnostics.h"
#include "biasaudit/vectors.h"

namespace biasaudit {

struct ContextFilterOptions {
  double conf_threshold = 0.2;
  double vote_threshold = 0.8;
  std::size_t k = 3;
};

// Reduces raw classifier candidates to at most k non-person objects:
//   1. drop confidence < conf_threshold
//   2. drop labels containing any lexicon token (man/woman/person classes)
//   3. in (confidence desc, label asc, classifier asc) order, drop a candidate
//      whose label is identical to, or has cosine >= vote_threshold with, an
//      already kept label
//   4. keep the first k
// A label with no vector never absorbs or gets absorbed (except by an
// identical label); each such label adds one coverage warning to `diag`.
VisualContext filter_context(const VisualContext& candidates, const EmbeddingStore& store,
                             const GenderLexicon& lexicon, const ContextFilterOptions& options = {},
                             Diagnostics* diag = nullptr);

}  // namespace biasaudit

#endif  // BIASAUDIT_CONTEXT_H_
