#include "biasaudit/text_score.h"

#include <algorithm>
#include <set>

#include "biasaudit/dataset.h"
#include "biasaudit/distance.h"
#include "biasaudit/estimate.h"
#include "biasaudit/parallel.h"

namespace biasaudit {

namespace {

TextRecord text_record_from_json(const nlohmann::json& j) {
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw Error(ErrorCode::kSchema, std::string("text record: '") + key + "' must be a string");
    }
    return j[key].get<std::string>();
  };
  TextRecord r;
  r.id = str("id");
  r.text = str("text");
  if (j.contains("keyword") && !j["keyword"].is_null()) {
    r.keyword = str("keyword");
    if (r.keyword->empty()) r.keyword.reset();
  }
  if (j.contains("confidence") && !j["confidence"].is_null()) {
    if (!j["confidence"].is_number()) {
      throw Error(ErrorCode::kSchema, "text record '" + r.id + "': confidence must be a number");
    }
    const double c = j["confidence"].get<double>();
    if (!(c >= 0.0 && c <= 1.0)) {
      throw Error(ErrorCode::kSchema, "text record '" + r.id + "': confidence outside [0, 1]");
    }
    r.confidence = c;
  }
  if (j.contains("gender") && !j["gender"].is_null()) {
    const auto g = j["gender"].is_string() ? parse_gender(j["gender"].get<std::string>())
                                           : std::nullopt;
    if (!g || (*g != GenderClass::kMan && *g != GenderClass::kWoman)) {
      throw Error(ErrorCode::kSchema, "text record '" + r.id + "': gender must be man or woman");
    }
    r.gold = g;
  }
  return r;
}

}  // namespace

std::vector<TextRecord> read_text_records(const std::filesystem::path& path) {
  std::vector<TextRecord> out;
  std::set<std::string> seen;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    try {
      auto r = text_record_from_json(j);
      if (!seen.insert(r.id).second) {
        throw Error(ErrorCode::kDuplicateKey, "duplicate record id '" + r.id + "'");
      }
      out.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  std::sort(out.begin(), out.end(),
            [](const TextRecord& a, const TextRecord& b) { return a.id < b.id; });
  return out;
}

TextScoreReport text_only_score(std::span<const TextRecord> records, const Sidecars& sidecars,
                                const TextScoreOptions& options) {
  if (sidecars.lm == nullptr) throw Error(ErrorCode::kDomain, "text score: no LM sidecar");
  static const EmbeddingStore kEmpty;
  const EmbeddingStore& embeddings = sidecars.embeddings ? *sidecars.embeddings : kEmpty;

  std::vector<const TextRecord*> order;
  for (const auto& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(),
            [](const TextRecord* a, const TextRecord* b) { return a->id < b->id; });

  std::vector<TextScoreRow> rows(order.size());
  parallel_for(order.size(), options.workers, [&](std::size_t i) {
    const auto& r = *order[i];
    auto& row = rows[i];
    row.id = r.id;
    row.keyword = r.keyword;
    row.gold = r.gold;
    row.confidence = r.confidence.value_or(options.default_confidence);
    std::vector<ContextObject> objects;
    if (r.keyword) objects.push_back({*r.keyword, row.confidence, "keyword"});
    auto score = [&](GenderClass g) {
      auto key = r.id + "#" + std::string(variant_suffix(g));
      const double p = hypothesis_probability(key, *sidecars.lm);
      const Vector* text = objects.empty() ? nullptr : embeddings.find(key);
      return score_with_context(r.id, g, std::move(key), p, text, objects, embeddings,
                                SelectionStrategy::kMaxSim);
    };
    row.man = score(GenderClass::kMan);
    row.woman = score(GenderClass::kWoman);
    row.predicted = predict_gender(row.man.score, row.woman.score, options.tie_epsilon);
  });

  TextScoreReport report;
  double sum_m = 0.0;
  double sum_w = 0.0;
  for (auto& row : rows) {
    sum_m += row.man.score;
    sum_w += row.woman.score;
    if (row.gold == GenderClass::kMan) ++report.gold_man;
    if (row.gold == GenderClass::kWoman) ++report.gold_woman;
  }
  if (!rows.empty()) {
    const auto n = static_cast<double>(rows.size());
    report.mean_man = sum_m / n;
    report.mean_woman = sum_w / n;
    report.to_m = bias_ratio_to_m(*report.mean_man, *report.mean_woman);
    report.to_w = bias_ratio_to_m(*report.mean_woman, *report.mean_man);
  }
  report.gold_to_m = bias_ratio_to_m(static_cast<double>(report.gold_man),
                                     static_cast<double>(report.gold_woman));
  report.gold_to_w = bias_ratio_to_m(static_cast<double>(report.gold_woman),
                                     static_cast<double>(report.gold_man));
  report.rows = std::move(rows);
  return report;
}

}  // namespace biasaudit
