#include "biasaudit/revision.h"

#include <algorithm>
#include <cmath>

#include "biasaudit/distance.h"
#include "biasaudit/parallel.h"

namespace biasaudit {

namespace {

double clamp_unit(double x, const char* what) {
  if (std::isnan(x)) throw Error(ErrorCode::kDomain, std::string(what) + " is NaN");
  return std::clamp(x, 0.0, 1.0);
}

const Vector& require_vector(const EmbeddingStore& store, const std::string& key) {
  const auto* v = store.find(key);
  if (v == nullptr) {
    throw Error(ErrorCode::kMissingKey, "embedding sidecar has no vector for '" + key + "'");
  }
  return *v;
}

}  // namespace

LmSidecar LmSidecar::Load(const std::filesystem::path& path) {
  LmSidecar lm;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    const auto where = path.string() + ":" + std::to_string(line) + ": ";
    if (j.is_object() && j.contains("_manifest")) return;
    if (!j.is_object() || !j.contains("key") || !j["key"].is_string()) {
      throw Error(ErrorCode::kSchema, where + "record needs a string 'key'");
    }
    if (!j.contains("mean_token_prob") && !j.contains("token_logprobs")) {
      throw Error(ErrorCode::kSchema, where + "record needs 'mean_token_prob' or 'token_logprobs'");
    }
    // An empty token list is accepted here and rejected by hypothesis_probability.
    LmEntry entry;
    if (j.contains("mean_token_prob") && !j["mean_token_prob"].is_null()) {
      if (!j["mean_token_prob"].is_number()) {
        throw Error(ErrorCode::kSchema, where + "mean_token_prob must be a number");
      }
      entry.mean_token_prob = j["mean_token_prob"].get<double>();
    }
    if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
      if (!j["token_logprobs"].is_array()) {
        throw Error(ErrorCode::kSchema, where + "token_logprobs must be an array");
      }
      for (const auto& x : j["token_logprobs"]) {
        if (!x.is_number()) throw Error(ErrorCode::kSchema, where + "non-numeric token logprob");
        entry.token_logprobs.push_back(x.get<double>());
      }
    }
    try {
      lm.insert(j["key"].get<std::string>(), std::move(entry));
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  });
  return lm;
}

void LmSidecar::insert(std::string key, LmEntry entry) {
  if (entry.mean_token_prob) {
    const double p = *entry.mean_token_prob;
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw Error(ErrorCode::kSchema, "mean_token_prob of '" + key + "' outside [0, 1]");
    }
  }
  for (double lp : entry.token_logprobs) {
    if (std::isnan(lp) || lp > 0.0) {
      throw Error(ErrorCode::kSchema, "token logprob of '" + key + "' must be <= 0");
    }
  }
  if (entries_.find(key) != entries_.end()) {
    throw Error(ErrorCode::kDuplicateKey, "duplicate LM key '" + key + "'");
  }
  entries_.emplace(std::move(key), std::move(entry));
}

const LmEntry* LmSidecar::find(std::string_view key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

double hypothesis_probability(std::string_view key, const LmSidecar& lm) {
  const auto* entry = lm.find(key);
  if (entry == nullptr) {
    throw Error(ErrorCode::kMissingKey, "LM sidecar has no entry for '" + std::string(key) + "'");
  }
  double p = 0.0;
  if (entry->mean_token_prob) {
    p = *entry->mean_token_prob;
  } else {
    if (entry->token_logprobs.empty()) {
      throw Error(ErrorCode::kSchema, "LM entry '" + std::string(key) + "' has no tokens");
    }
    double sum = 0.0;
    for (double lp : entry->token_logprobs) sum += std::exp(lp);
    p = sum / static_cast<double>(entry->token_logprobs.size());
  }
  return std::clamp(p, kProbabilityFloor, 1.0);
}

double alpha(double sim, double p_object) {
  sim = clamp_unit(sim, "sim");
  p_object = clamp_unit(p_object, "object probability");
  const double exponent = 1.0 - p_object;
  if (exponent == 0.0) return 1.0;
  if (sim == 1.0) return 0.0;
  return std::pow((1.0 - sim) / (1.0 + sim), exponent);
}

double revise(double p_hypothesis, double alpha) {
  if (!(p_hypothesis > 0.0 && p_hypothesis <= 1.0)) {
    throw Error(ErrorCode::kDomain, "revise: hypothesis probability outside (0, 1]");
  }
  alpha = clamp_unit(alpha, "alpha");
  if (alpha == 1.0) return p_hypothesis;
  if (alpha == 0.0) return 1.0;
  return std::clamp(std::exp(alpha * std::log(p_hypothesis)), p_hypothesis, 1.0);
}

std::string_view to_string(SelectionStrategy s) {
  return s == SelectionStrategy::kMaxSim ? "max_sim" : "mean_topk";
}

std::optional<SelectionStrategy> parse_strategy(std::string_view name) {
  if (name == "max_sim") return SelectionStrategy::kMaxSim;
  if (name == "mean_topk") return SelectionStrategy::kMeanTopK;
  return std::nullopt;
}

std::string variant_key(const CaptionRecord& record, GenderClass g) {
  if (!record.mask_present()) return record.id;
  return record.id + "#" + std::string(variant_suffix(g));
}

ScoredCaption score_with_context(std::string caption_id, GenderClass g, std::string key,
                                 double p_hypothesis, const Vector* text_vector,
                                 std::span<const ContextObject> objects,
                                 const EmbeddingStore& embeddings, SelectionStrategy strategy) {
  ScoredCaption out;
  out.caption_id = std::move(caption_id);
  out.gender = g;
  out.key = std::move(key);
  out.p_hypothesis = p_hypothesis;
  out.score = p_hypothesis;
  if (objects.empty()) return out;
  if (text_vector == nullptr) {
    throw Error(ErrorCode::kMissingKey,
                "embedding sidecar has no vector for '" + out.key + "'");
  }

  for (const auto& o : objects) {
    ObjectEvidence e;
    e.label = o.label;
    e.p_object = o.confidence;
    e.sim = std::clamp(cosine(*text_vector, require_vector(embeddings, o.label)), 0.0, 1.0);
    e.alpha = alpha(e.sim, e.p_object);
    e.score = revise(p_hypothesis, e.alpha);
    out.evidence.push_back(std::move(e));
  }

  if (strategy == SelectionStrategy::kMaxSim) {
    const auto best = std::min_element(
        out.evidence.begin(), out.evidence.end(),
        [](const ObjectEvidence& a, const ObjectEvidence& b) {
          if (a.sim != b.sim) return a.sim > b.sim;
          if (a.p_object != b.p_object) return a.p_object > b.p_object;
          return a.label < b.label;
        });
    out.object_label = best->label;
    out.p_object = best->p_object;
    out.sim = best->sim;
    out.alpha = best->alpha;
    out.score = best->score;
    return out;
  }

  const auto n = static_cast<double>(out.evidence.size());
  double score = 0.0;
  double sim = 0.0;
  double p_object = 0.0;
  for (const auto& e : out.evidence) {
    score += e.score;
    sim += e.sim;
    p_object += e.p_object;
  }
  out.score = std::clamp(score / n, p_hypothesis, 1.0);
  out.sim = sim / n;
  out.p_object = p_object / n;
  out.alpha = p_hypothesis < 1.0
                  ? std::clamp(std::log(out.score) / std::log(p_hypothesis), 0.0, 1.0)
                  : 1.0;
  return out;
}

ScoredCaption score_caption(const CaptionRecord& record, GenderClass g,
                            const VisualContext* context, const Sidecars& sidecars,
                            SelectionStrategy strategy) {
  if (sidecars.lm == nullptr) throw Error(ErrorCode::kDomain, "score_caption: no LM sidecar");
  auto key = variant_key(record, g);
  const double p = hypothesis_probability(key, *sidecars.lm);
  const bool has_objects = context != nullptr && !context->objects.empty();
  if (has_objects && sidecars.embeddings == nullptr) {
    throw Error(ErrorCode::kDomain, "score_caption: no embedding sidecar");
  }
  const Vector* text = has_objects ? sidecars.embeddings->find(key) : nullptr;
  static const EmbeddingStore kEmpty;
  return score_with_context(record.id, g, std::move(key), p, text,
                            has_objects ? std::span<const ContextObject>(context->objects)
                                        : std::span<const ContextObject>(),
                            has_objects ? *sidecars.embeddings : kEmpty, strategy);
}

GenderScoreAggregate gender_score(std::span<const ScoredCaption> scored, GenderClass g) {
  GenderScoreAggregate agg;
  agg.gender = g;
  double sum = 0.0;
  for (const auto& s : scored) {
    if (s.gender != g) continue;
    sum += s.score;
    ++agg.count;
  }
  if (agg.count > 0) agg.mean_score = sum / static_cast<double>(agg.count);
  return agg;
}

ScoreRun score_dataset(std::span<const CaptionRecord> captions, const ContextIndex& contexts,
                       const GenderLexicon& lexicon, const Sidecars& sidecars,
                       const ScoreOptions& options) {
  std::vector<const CaptionRecord*> order;
  for (const auto& c : captions) order.push_back(&c);
  std::sort(order.begin(), order.end(),
            [](const CaptionRecord* a, const CaptionRecord* b) { return a->id < b->id; });

  std::vector<std::vector<ScoredCaption>> slots(order.size());
  std::vector<char> mixed(order.size(), 0);
  parallel_for(order.size(), options.workers, [&](std::size_t i) {
    const auto& record = *order[i];
    const auto* context = contexts.find(record.image_id);
    if (record.mask_present()) {
      slots[i].push_back(score_caption(record, GenderClass::kMan, context, sidecars,
                                       options.strategy));
      slots[i].push_back(score_caption(record, GenderClass::kWoman, context, sidecars,
                                       options.strategy));
      if (options.include_neutral) {
        slots[i].push_back(score_caption(record, GenderClass::kNeutral, context, sidecars,
                                         options.strategy));
      }
      return;
    }
    const auto label = label_caption_gender(record.text, lexicon);
    if (label == GenderClass::kMixed) {
      mixed[i] = 1;
      return;
    }
    slots[i].push_back(score_caption(record, label, context, sidecars, options.strategy));
  });

  ScoreRun run;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    run.mixed_skipped += mixed[i];
    for (auto& s : slots[i]) run.scored.push_back(std::move(s));
  }
  return run;
}

GenderScoreSummary summarize_scores(std::span<const ScoredCaption> scored) {
  GenderScoreSummary s;
  s.by_gender = {gender_score(scored, GenderClass::kMan), gender_score(scored, GenderClass::kWoman),
                 gender_score(scored, GenderClass::kNeutral)};
  const auto& m = s.by_gender[0].mean_score;
  const auto& w = s.by_gender[1].mean_score;
  const auto& p = s.by_gender[2].mean_score;
  if (m && w) {
    s.to_m = bias_ratio_to_m(*m, *w);
    s.to_w = bias_ratio_to_m(*w, *m);
  }
  if (p) {
    if (m) s.man_to_neutral = ratio_to_neutral(*m, *p);
    if (w) s.woman_to_neutral = ratio_to_neutral(*w, *p);
  }
  return s;
}

}  // namespace biasaudit
