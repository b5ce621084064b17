#include "biasaudit/distance.h"

#include <algorithm>
#include <map>
#include <set>

#include "biasaudit/parallel.h"

namespace biasaudit {

std::optional<double> bias_ratio_to_m(double s_m, double s_w) {
  if (s_m < 0.0 || s_w < 0.0) {
    throw Error(ErrorCode::kDomain, "bias ratio: scores must be non-negative");
  }
  const double total = s_m + s_w;
  if (total == 0.0) return std::nullopt;
  if (s_m <= s_w) return s_m / total;
  return 1.0 - s_w / total;
}

std::optional<double> ratio_to_neutral(double s_gender, double s_person) {
  if (s_gender < 0.0 || s_person < 0.0) {
    throw Error(ErrorCode::kDomain, "ratio to neutral: scores must be non-negative");
  }
  if (s_person == 0.0) return std::nullopt;
  return s_gender / s_person;
}

std::optional<double> word_distance(std::string_view object_label, GenderClass g,
                                    const GenderLexicon& lexicon, const EmbeddingStore& store) {
  const auto* term = store.find(lexicon.canonical_term(g));
  if (term == nullptr) return std::nullopt;
  const auto object = embed_phrase(object_label, store);
  if (!object) return std::nullopt;
  return std::max(0.0, cosine(*term, *object));
}

std::optional<double> sentence_distance(std::string_view caption_key, GenderClass g,
                                        const EmbeddingStore& sidecar,
                                        const GenderLexicon& lexicon) {
  const auto* anchor = sidecar.find(lexicon.anchor_phrase(g));
  const auto* caption = sidecar.find(caption_key);
  if (anchor == nullptr || caption == nullptr) return std::nullopt;
  return std::max(0.0, cosine(*anchor, *caption));
}

RowRatios ratios_of(const GenderDistanceRow& row) {
  RowRatios r;
  const auto m = row.man.mean();
  const auto w = row.woman.mean();
  const auto p = row.person.mean();
  if (m && w) {
    r.to_m = bias_ratio_to_m(*m, *w);
    r.to_w = bias_ratio_to_m(*w, *m);
  }
  if (p) {
    if (m) r.man_to_neutral = ratio_to_neutral(*m, *p);
    if (w) r.woman_to_neutral = ratio_to_neutral(*w, *p);
  }
  return r;
}

std::string_view to_string(DistanceLevel level) {
  return level == DistanceLevel::kWord ? "word" : "sentence";
}

namespace {

// One similarity evaluation for a (caption, object) pair and one column.
struct Contribution {
  std::string object;
  GenderClass column;
  std::optional<double> value;
  std::string missing_key;
};

struct CaptionWork {
  bool mixed = false;
  bool masked = false;
  std::vector<Contribution> items;
};

std::string missing_word_key(std::string_view label, GenderClass g, const GenderLexicon& lexicon,
                             const EmbeddingStore& store) {
  if (!store.contains(lexicon.canonical_term(g))) return lexicon.canonical_term(g);
  return std::string(label);
}

std::string missing_sentence_key(std::string_view caption_key, GenderClass g,
                                 const GenderLexicon& lexicon, const EmbeddingStore& store) {
  if (!store.contains(lexicon.anchor_phrase(g))) return lexicon.anchor_phrase(g);
  return std::string(caption_key);
}

MeanAccumulator& column_of(GenderDistanceRow& row, GenderClass g) {
  switch (g) {
    case GenderClass::kMan: return row.man;
    case GenderClass::kWoman: return row.woman;
    default: return row.person;
  }
}

}  // namespace

DistanceTable aggregate_distance_table(std::span<const CaptionRecord> captions,
                                       const ContextIndex& contexts, const GenderLexicon& lexicon,
                                       const EmbeddingStore& store, const DistanceOptions& options,
                                       Diagnostics* diag) {
  // Reduce in id order so every emitted sum is independent of input order and
  // of the worker schedule.
  std::vector<const CaptionRecord*> order;
  order.reserve(captions.size());
  for (const auto& c : captions) order.push_back(&c);
  std::sort(order.begin(), order.end(),
            [](const CaptionRecord* a, const CaptionRecord* b) { return a->id < b->id; });

  std::vector<CaptionWork> work(order.size());
  parallel_for(order.size(), options.workers, [&](std::size_t i) {
    const auto& record = *order[i];
    auto& out = work[i];
    if (record.mask_present()) {
      out.masked = true;
      return;
    }
    const auto label = label_caption_gender(record.text, lexicon);
    if (label == GenderClass::kMixed) {
      out.mixed = true;
      return;
    }
    const auto* context = contexts.find(record.image_id);
    if (context == nullptr) return;
    std::vector<GenderClass> columns = {GenderClass::kNeutral};
    if (label != GenderClass::kNeutral) columns.push_back(label);
    for (const auto& object : context->objects) {
      for (const auto column : columns) {
        Contribution c{object.label, column, std::nullopt, {}};
        if (options.level == DistanceLevel::kWord) {
          c.value = word_distance(object.label, column, lexicon, store);
          if (!c.value) c.missing_key = missing_word_key(object.label, column, lexicon, store);
        } else {
          c.value = sentence_distance(record.id, column, store, lexicon);
          if (!c.value) c.missing_key = missing_sentence_key(record.id, column, lexicon, store);
        }
        out.items.push_back(std::move(c));
      }
    }
  });

  DistanceTable table;
  table.level = options.level;
  std::map<std::string, GenderDistanceRow> rows;
  std::set<std::string> reported;
  for (const auto& w : work) {
    if (w.masked) {
      ++table.masked_captions;
      continue;
    }
    if (w.mixed) {
      ++table.mixed_captions;
      continue;
    }
    for (const auto& c : w.items) {
      if (!c.value) {
        ++table.skipped;
        if (diag != nullptr && reported.insert(c.missing_key).second) {
          diag->warn("coverage", "no vector for '" + c.missing_key + "', pairs skipped");
        }
        continue;
      }
      ++table.scored;
      auto& row = rows.try_emplace(c.object, GenderDistanceRow{c.object, {}, {}, {}}).first->second;
      column_of(row, c.column).add(*c.value);
      column_of(table.corpus, c.column).add(*c.value);
    }
  }
  for (auto& [label, row] : rows) table.rows.push_back(std::move(row));

  constexpr std::array<GenderClass, 3> kClasses = {GenderClass::kMan, GenderClass::kWoman,
                                                   GenderClass::kNeutral};
  for (std::size_t k = 0; k < kClasses.size(); ++k) {
    auto& ranked = table.ranking[k];
    for (auto& row : table.rows) {
      if (const auto m = column_of(row, kClasses[k]).mean()) ranked.push_back({row.subject, *m});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const RankedObject& a, const RankedObject& b) {
      return a.score > b.score;
    });
    if (ranked.size() > options.top_n) ranked.resize(options.top_n);
  }
  return table;
}

}  // namespace biasaudit
