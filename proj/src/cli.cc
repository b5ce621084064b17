#include "biasaudit/cli.h"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "biasaudit/context.h"
#include "biasaudit/cooc.h"
#include "biasaudit/dataset.h"
#include "biasaudit/distance.h"
#include "biasaudit/estimate.h"
#include "biasaudit/format.h"
#include "biasaudit/parallel.h"
#include "biasaudit/revision.h"
#include "biasaudit/text_score.h"
#include "biasaudit/vectors.h"

namespace biasaudit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Shared helpers

struct Common {
  std::string lexicon;
  int threads = 0;
};

GenderLexicon load_lexicon(const std::string& path) {
  return path.empty() ? GenderLexicon::Default() : GenderLexicon::Load(path);
}

fs::path sibling(const fs::path& out, const std::string& extension) {
  auto p = out;
  p.replace_extension(extension);
  return p;
}

ojson read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": malformed JSON (" + e.what() + ")");
  }
}

std::string jsonl(const std::vector<ojson>& records) {
  std::string text;
  for (const auto& r : records) {
    text += r.dump();
    text += '\n';
  }
  return text;
}

void emit(std::ostream& err, const Diagnostics& diag) {
  for (const auto& d : diag.entries()) err << to_json_line(d) << '\n';
}

std::optional<double> opt_number(const ojson& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) return std::nullopt;
  return j[key].get<double>();
}

std::string cell_count(const ojson& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_integer()) return "";
  return std::to_string(j[key].get<std::int64_t>());
}

std::vector<CaptionRecord> select_source(std::vector<CaptionRecord> captions,
                                         const std::string& source) {
  if (source == "all") return captions;
  const auto wanted = source == "human" ? CaptionSource::kHuman : CaptionSource::kModel;
  std::erase_if(captions, [&](const CaptionRecord& c) { return c.source != wanted; });
  return captions;
}

// ---------------------------------------------------------------------------
// JSON views of results

ojson row_json(const GenderDistanceRow& row) {
  const auto r = ratios_of(row);
  ojson j;
  j["subject"] = row.subject;
  j["s_person"] = json_or_null(row.person.mean());
  j["s_man"] = json_or_null(row.man.mean());
  j["s_woman"] = json_or_null(row.woman.mean());
  j["n_person"] = row.person.count;
  j["n_man"] = row.man.count;
  j["n_woman"] = row.woman.count;
  j["to_m"] = json_or_null(r.to_m);
  j["to_w"] = json_or_null(r.to_w);
  j["man_to_neutral"] = json_or_null(r.man_to_neutral);
  j["woman_to_neutral"] = json_or_null(r.woman_to_neutral);
  return j;
}

ojson scored_json(const ScoredCaption& s) {
  ojson j;
  j["caption_id"] = s.caption_id;
  j["gender"] = std::string(to_string(s.gender));
  j["key"] = s.key;
  j["p_hypothesis"] = s.p_hypothesis;
  j["object_label"] = s.object_label ? ojson(*s.object_label) : ojson(nullptr);
  j["p_object"] = s.p_object;
  j["sim"] = s.sim;
  j["alpha"] = s.alpha;
  j["score"] = s.score;
  j["evidence"] = ojson::array();
  for (const auto& e : s.evidence) {
    ojson ej;
    ej["label"] = e.label;
    ej["p_object"] = e.p_object;
    ej["sim"] = e.sim;
    ej["alpha"] = e.alpha;
    ej["score"] = e.score;
    j["evidence"].push_back(std::move(ej));
  }
  return j;
}

ScoredCaption scored_from_json(const ojson& j) {
  ScoredCaption s;
  try {
    s.caption_id = j.at("caption_id").get<std::string>();
    const auto g = parse_gender(j.at("gender").get<std::string>());
    if (!g) throw Error(ErrorCode::kSchema, "scored caption: bad gender");
    s.gender = *g;
    s.score = j.at("score").get<double>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kSchema, "scored caption: needs caption_id, gender and score");
  }
  return s;
}

ojson summary_json(const GenderScoreSummary& s) {
  ojson genders;
  for (const auto& agg : s.by_gender) {
    ojson g;
    g["mean_score"] = json_or_null(agg.mean_score);
    g["count"] = agg.count;
    genders[std::string(to_string(agg.gender))] = std::move(g);
  }
  ojson j;
  j["genders"] = std::move(genders);
  j["man_to_neutral"] = json_or_null(s.man_to_neutral);
  j["woman_to_neutral"] = json_or_null(s.woman_to_neutral);
  j["to_m"] = json_or_null(s.to_m);
  j["to_w"] = json_or_null(s.to_w);
  return j;
}

ojson counts_json(const CoocCounts& c) {
  ojson j;
  j["man"] = c.man;
  j["woman"] = c.woman;
  j["neutral"] = c.neutral;
  j["mixed"] = c.mixed;
  j["masked"] = c.masked;
  return j;
}

// ---------------------------------------------------------------------------
// Subcommands

struct FilterArgs {
  std::string contexts, vectors, out;
  double conf = 0.2, vote = 0.8;
  std::size_t k = 3;
};

int cmd_filter_context(const Common& common, const FilterArgs& a, std::ostream& err) {
  const auto lexicon = load_lexicon(common.lexicon);
  Diagnostics load_diag;
  const auto store = load_word_vectors(a.vectors, &load_diag);
  const auto raw = read_contexts(a.contexts);
  const ContextFilterOptions options{a.conf, a.vote, a.k};

  std::vector<VisualContext> filtered(raw.size());
  std::vector<Diagnostics> diags(raw.size());
  parallel_for(raw.size(), resolve_workers(common.threads), [&](std::size_t i) {
    filtered[i] = filter_context(raw[i], store, lexicon, options, &diags[i]);
  });
  write_contexts(a.out, filtered);
  emit(err, load_diag);
  for (const auto& d : diags) emit(err, d);
  return 0;
}

struct DistanceArgs {
  std::string level = "word", vectors, sidecar, captions, contexts, out, source = "all";
  std::size_t top_n = 10;
};

int cmd_distance(const Common& common, const DistanceArgs& a, std::ostream& err) {
  const auto lexicon = load_lexicon(common.lexicon);
  const auto level = a.level == "word" ? DistanceLevel::kWord : DistanceLevel::kSentence;
  Diagnostics diag;
  EmbeddingStore store;
  if (level == DistanceLevel::kWord) {
    if (a.vectors.empty()) throw Error(ErrorCode::kSchema, "distance --level word needs --vectors");
    store = load_word_vectors(a.vectors, &diag);
  } else {
    if (a.sidecar.empty()) {
      throw Error(ErrorCode::kSchema, "distance --level sentence needs --sidecar");
    }
    store = load_sidecar_vectors(a.sidecar);
  }
  const auto captions = select_source(read_captions(a.captions), a.source);
  const ContextIndex contexts(read_contexts(a.contexts));
  const auto table = aggregate_distance_table(
      captions, contexts, lexicon, store, {level, a.top_n, resolve_workers(common.threads)}, &diag);

  ojson j;
  j["kind"] = "distance";
  j["level"] = std::string(to_string(level));
  j["source"] = a.source;
  j["corpus"] = row_json(table.corpus);
  j["rows"] = ojson::array();
  for (const auto& row : table.rows) j["rows"].push_back(row_json(row));
  ojson ranking;
  constexpr std::array<const char*, 3> kNames = {"man", "woman", "neutral"};
  for (std::size_t k = 0; k < 3; ++k) {
    ranking[kNames[k]] = ojson::array();
    for (const auto& r : table.ranking[k]) {
      ojson e;
      e["object"] = r.label;
      e["score"] = r.score;
      ranking[kNames[k]].push_back(std::move(e));
    }
  }
  j["ranking"] = std::move(ranking);
  j["coverage"] = {{"scored", table.scored}, {"skipped", table.skipped},
                   {"mixed_captions", table.mixed_captions},
                   {"masked_captions", table.masked_captions}};
  write_file_atomic(a.out, j.dump(2) + "\n");

  CsvTable csv({"subject", "n_person", "s_person", "n_man", "s_man", "n_woman", "s_woman", "to_m",
                "to_w", "man_to_neutral", "woman_to_neutral"});
  auto add = [&](const GenderDistanceRow& row) {
    const auto r = ratios_of(row);
    csv.add_row({row.subject, std::to_string(row.person.count),
                 format_table_value(row.person.mean()), std::to_string(row.man.count),
                 format_table_value(row.man.mean()), std::to_string(row.woman.count),
                 format_table_value(row.woman.mean()), format_table_value(r.to_m),
                 format_table_value(r.to_w), format_table_value(r.man_to_neutral),
                 format_table_value(r.woman_to_neutral)});
  };
  add(table.corpus);
  for (const auto& row : table.rows) add(row);
  write_file_atomic(sibling(a.out, ".csv"), csv.str());
  emit(err, diag);
  return 0;
}

struct ScoreArgs {
  std::string captions, contexts, sidecar_emb, sidecar_lm, out, strategy = "max_sim";
  bool include_neutral = false;
};

int cmd_score(const Common& common, const ScoreArgs& a) {
  const auto lexicon = load_lexicon(common.lexicon);
  const auto captions = read_captions(a.captions);
  const ContextIndex contexts(read_contexts(a.contexts));
  const auto emb = load_sidecar_vectors(a.sidecar_emb);
  const auto lm = LmSidecar::Load(a.sidecar_lm);
  const auto strategy = *parse_strategy(a.strategy);
  const auto run = score_dataset(captions, contexts, lexicon, {&emb, &lm},
                                 {strategy, a.include_neutral, resolve_workers(common.threads)});

  std::vector<ojson> records;
  for (const auto& s : run.scored) records.push_back(scored_json(s));
  write_file_atomic(a.out, jsonl(records));

  ojson j;
  j["kind"] = "score";
  j["strategy"] = a.strategy;
  j["mixed_skipped"] = run.mixed_skipped;
  j.update(summary_json(summarize_scores(run.scored)));
  write_file_atomic(sibling(a.out, ".summary.json"), j.dump(2) + "\n");
  return 0;
}

struct EstimateArgs {
  std::string captions, contexts, sidecar_emb, sidecar_lm, out, strategy = "max_sim";
  bool include_neutral = false;
  double tie_epsilon = 1e-9;
};

int cmd_estimate(const Common& common, const EstimateArgs& a, std::ostream& err) {
  const auto captions = read_captions(a.captions);
  const ContextIndex contexts(read_contexts(a.contexts));
  const auto emb = load_sidecar_vectors(a.sidecar_emb);
  const auto lm = LmSidecar::Load(a.sidecar_lm);
  EstimateOptions options;
  options.tie_epsilon = a.tie_epsilon;
  options.strategy = *parse_strategy(a.strategy);
  options.include_neutral = a.include_neutral;
  options.workers = resolve_workers(common.threads);
  const auto report = estimation_report(captions, contexts, {&emb, &lm}, options);

  std::vector<ojson> records;
  for (const auto& p : report.predictions) {
    ojson j;
    j["caption_id"] = p.caption_id;
    j["score_man"] = p.score_man;
    j["score_woman"] = p.score_woman;
    if (a.include_neutral) j["score_person"] = json_or_null(p.score_person);
    j["predicted"] = std::string(to_string(p.predicted));
    j["margin"] = p.margin;
    records.push_back(std::move(j));
  }
  write_file_atomic(a.out, jsonl(records));

  ojson j;
  j["kind"] = "estimate";
  j["counts"] = {{"man", report.man}, {"woman", report.woman}, {"neutral", report.neutral}};
  j["unmasked_skipped"] = report.unmasked_skipped;
  j["to_m"] = json_or_null(report.to_m);
  j["to_w"] = json_or_null(report.to_w);
  j["tie_epsilon"] = a.tie_epsilon;
  j["errors"] = ojson::array();
  Diagnostics diag;
  for (const auto& e : report.errors) {
    j["errors"].push_back({{"caption_id", e.caption_id}, {"message", e.message}});
    diag.error("record", e.caption_id + ": " + e.message);
  }
  write_file_atomic(sibling(a.out, ".summary.json"), j.dump(2) + "\n");
  emit(err, diag);
  return 0;
}

struct CoocArgs {
  std::string captions, out, source = "model", filter, scores;
  std::vector<std::string> objects;
};

int cmd_cooc(const Common& common, const CoocArgs& a) {
  const auto lexicon = load_lexicon(common.lexicon);
  const auto captions = select_source(read_captions(a.captions), a.source);
  std::vector<ScoredCaption> scored;
  if (!a.scores.empty()) {
    for_each_jsonl(a.scores, [&](const nlohmann::json& j, std::size_t) {
      scored.push_back(scored_from_json(ojson(j)));
    });
  }
  const auto filter = a.filter.empty() ? std::nullopt : std::optional<std::string_view>(a.filter);
  const auto counts = cooc_counts(captions, lexicon, filter);

  ojson j;
  j["kind"] = "cooc";
  j["source"] = a.source;
  j["filter"] = a.filter.empty() ? ojson(nullptr) : ojson(a.filter);
  j["counts"] = counts_json(counts);
  j["to_m"] = json_or_null(counts.to_m());
  j["to_w"] = json_or_null(counts.to_w());
  j["per_image_to_m"] = json_or_null(per_image_to_m(captions, lexicon));
  j["objects"] = ojson::array();
  auto objects = a.objects;
  std::sort(objects.begin(), objects.end());
  objects.erase(std::unique(objects.begin(), objects.end()), objects.end());
  for (const auto& object : objects) {
    const auto c = cooc_counts(captions, lexicon, object);
    const auto cooc = per_object_bias(captions, lexicon, object, BiasMethod::kCooc);
    ojson o;
    o["object"] = object;
    o["counts"] = counts_json(c);
    o["cooc"] = {{"to_m", json_or_null(cooc.to_m)}, {"to_w", json_or_null(cooc.to_w)}};
    if (a.scores.empty()) {
      o["gender_score"] = nullptr;
    } else {
      const auto gs =
          per_object_bias(captions, lexicon, object, BiasMethod::kGenderScore, scored);
      o["gender_score"] = {{"to_m", json_or_null(gs.to_m)}, {"to_w", json_or_null(gs.to_w)}};
    }
    j["objects"].push_back(std::move(o));
  }
  write_file_atomic(a.out, j.dump(2) + "\n");
  return 0;
}

struct LeakageArgs {
  std::string model, human, out;
};

std::pair<std::int64_t, std::int64_t> summary_counts(const fs::path& path) {
  const auto j = read_json_file(path);
  try {
    const auto& c = j.at("counts");
    return {c.at("man").get<std::int64_t>(), c.at("woman").get<std::int64_t>()};
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kSchema, path.string() + ": needs counts.man and counts.woman");
  }
}

int cmd_leakage(const LeakageArgs& a) {
  const auto [model_m, model_w] = summary_counts(a.model);
  const auto [human_m, human_w] = summary_counts(a.human);
  ojson j;
  j["kind"] = "leakage";
  j["model"] = {{"man", model_m}, {"woman", model_w}};
  j["human"] = {{"man", human_m}, {"woman", human_w}};
  j["leakage"] = {{"man", json_or_null(leakage(model_m, human_m))},
                  {"woman", json_or_null(leakage(model_w, human_w))}};
  write_file_atomic(a.out, j.dump(2) + "\n");
  return 0;
}

struct TextScoreArgs {
  std::string records, sidecar_emb, sidecar_lm, out;
  double default_confidence = 0.5;
  double tie_epsilon = 1e-9;
};

int cmd_text_score(const Common& common, const TextScoreArgs& a) {
  const auto records = read_text_records(a.records);
  std::optional<EmbeddingStore> emb;
  if (!a.sidecar_emb.empty()) emb = load_sidecar_vectors(a.sidecar_emb);
  const auto lm = LmSidecar::Load(a.sidecar_lm);
  TextScoreOptions options;
  options.default_confidence = a.default_confidence;
  options.tie_epsilon = a.tie_epsilon;
  options.workers = resolve_workers(common.threads);
  const auto report = text_only_score(records, {emb ? &*emb : nullptr, &lm}, options);

  std::vector<ojson> rows;
  for (const auto& r : report.rows) {
    ojson j;
    j["id"] = r.id;
    j["keyword"] = r.keyword ? ojson(*r.keyword) : ojson(nullptr);
    j["confidence"] = r.confidence;
    j["score_man"] = r.man.score;
    j["score_woman"] = r.woman.score;
    j["sim_man"] = r.man.sim;
    j["sim_woman"] = r.woman.sim;
    j["predicted"] = std::string(to_string(r.predicted));
    j["gold"] = r.gold ? ojson(std::string(to_string(*r.gold))) : ojson(nullptr);
    rows.push_back(std::move(j));
  }
  write_file_atomic(a.out, jsonl(rows));

  ojson j;
  j["kind"] = "text-score";
  j["records"] = report.rows.size();
  j["mean_score_man"] = json_or_null(report.mean_man);
  j["mean_score_woman"] = json_or_null(report.mean_woman);
  j["to_m"] = json_or_null(report.to_m);
  j["to_w"] = json_or_null(report.to_w);
  j["reference"] = {{"man", report.gold_man},
                    {"woman", report.gold_woman},
                    {"to_m", json_or_null(report.gold_to_m)},
                    {"to_w", json_or_null(report.gold_to_w)}};
  write_file_atomic(sibling(a.out, ".summary.json"), j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct TableSpec {
  const char* name;
  const char* artifact;
  const char* producer;
};

constexpr std::array<TableSpec, 8> kTables = {{
    {"distance", "distance.json", "distance --out <run-dir>/distance.json"},
    {"ranking", "distance.json", "distance --out <run-dir>/distance.json"},
    {"gender-score", "score.summary.json", "score --out <run-dir>/score.jsonl"},
    {"estimation", "estimate.summary.json", "estimate --out <run-dir>/estimate.jsonl"},
    {"cooc", "cooc.json", "cooc --out <run-dir>/cooc.json"},
    {"per-object", "cooc.json", "cooc --object LABEL --out <run-dir>/cooc.json"},
    {"leakage", "leakage.json", "leakage --out <run-dir>/leakage.json"},
    {"text-score", "text_score.summary.json", "text-score --out <run-dir>/text_score.jsonl"},
}};

CsvTable build_table(const std::string& name, const std::optional<ojson>& art,
                     const std::optional<ojson>& leak) {
  if (name == "distance") {
    CsvTable t({"subject", "person", "man", "woman", "m", "w", "to_m", "to_w"});
    if (art) {
      auto add = [&](const ojson& r) {
        t.add_row({r.at("subject").get<std::string>(), format_table_value(opt_number(r, "s_person")),
                   format_table_value(opt_number(r, "s_man")),
                   format_table_value(opt_number(r, "s_woman")),
                   format_table_value(opt_number(r, "man_to_neutral")),
                   format_table_value(opt_number(r, "woman_to_neutral")),
                   format_table_value(opt_number(r, "to_m")),
                   format_table_value(opt_number(r, "to_w"))});
      };
      add(art->at("corpus"));
      for (const auto& r : art->at("rows")) add(r);
    }
    return t;
  }
  if (name == "ranking") {
    CsvTable t({"gender", "rank", "object", "score"});
    if (art) {
      for (const char* g : {"man", "woman", "neutral"}) {
        std::size_t rank = 0;
        for (const auto& e : art->at("ranking").at(g)) {
          t.add_row({g, std::to_string(++rank), e.at("object").get<std::string>(),
                     format_table_value(opt_number(e, "score"))});
        }
      }
    }
    return t;
  }
  if (name == "gender-score") {
    CsvTable t({"person", "man", "woman", "m", "w", "to_m", "to_w", "leakage_m", "leakage_w"});
    if (art) {
      const auto& g = art->at("genders");
      std::string leak_m, leak_w;
      if (leak) {
        leak_m = format_table_value(opt_number(leak->at("leakage"), "man"));
        leak_w = format_table_value(opt_number(leak->at("leakage"), "woman"));
      }
      t.add_row({format_table_value(opt_number(g.at("neutral"), "mean_score")),
                 format_table_value(opt_number(g.at("man"), "mean_score")),
                 format_table_value(opt_number(g.at("woman"), "mean_score")),
                 format_table_value(opt_number(*art, "man_to_neutral")),
                 format_table_value(opt_number(*art, "woman_to_neutral")),
                 format_table_value(opt_number(*art, "to_m")),
                 format_table_value(opt_number(*art, "to_w")), leak_m, leak_w});
    }
    return t;
  }
  if (name == "estimation") {
    CsvTable t({"man", "woman", "neutral", "to_m", "to_w"});
    if (art) {
      const auto& c = art->at("counts");
      t.add_row({cell_count(c, "man"), cell_count(c, "woman"), cell_count(c, "neutral"),
                 format_table_value(opt_number(*art, "to_m")),
                 format_table_value(opt_number(*art, "to_w"))});
    }
    return t;
  }
  if (name == "cooc") {
    CsvTable t({"source", "man", "woman", "neutral", "mixed", "to_m", "to_w", "per_image_to_m"});
    if (art) {
      const auto& c = art->at("counts");
      t.add_row({art->at("source").get<std::string>(), cell_count(c, "man"),
                 cell_count(c, "woman"), cell_count(c, "neutral"), cell_count(c, "mixed"),
                 format_table_value(opt_number(*art, "to_m")),
                 format_table_value(opt_number(*art, "to_w")),
                 format_table_value(opt_number(*art, "per_image_to_m"))});
    }
    return t;
  }
  if (name == "per-object") {
    CsvTable t({"object", "method", "to_m", "to_w"});
    if (art) {
      for (const auto& o : art->at("objects")) {
        const auto object = o.at("object").get<std::string>();
        for (const char* method : {"cooc", "gender_score"}) {
          if (o.at(method).is_null()) continue;
          t.add_row({object, method, format_table_value(opt_number(o.at(method), "to_m")),
                     format_table_value(opt_number(o.at(method), "to_w"))});
        }
      }
    }
    return t;
  }
  if (name == "leakage") {
    CsvTable t({"model_man", "model_woman", "human_man", "human_woman", "leakage_m", "leakage_w"});
    if (art) {
      t.add_row({cell_count(art->at("model"), "man"), cell_count(art->at("model"), "woman"),
                 cell_count(art->at("human"), "man"), cell_count(art->at("human"), "woman"),
                 format_table_value(opt_number(art->at("leakage"), "man")),
                 format_table_value(opt_number(art->at("leakage"), "woman"))});
    }
    return t;
  }
  // text-score
  CsvTable t({"method", "to_m", "to_w"});
  if (art) {
    t.add_row({"reference counts", format_table_value(opt_number(art->at("reference"), "to_m")),
               format_table_value(opt_number(art->at("reference"), "to_w"))});
    t.add_row({"gender score", format_table_value(opt_number(*art, "to_m")),
               format_table_value(opt_number(*art, "to_w"))});
  }
  return t;
}

struct ReportArgs {
  std::string run_dir, out;
  std::vector<std::string> tables;
};

int cmd_report(const ReportArgs& a) {
  std::vector<const TableSpec*> selected;
  for (const auto& spec : kTables) {
    const bool requested = a.tables.empty() ||
                           std::find(a.tables.begin(), a.tables.end(), spec.name) != a.tables.end();
    if (requested) selected.push_back(&spec);
  }
  for (const auto& name : a.tables) {
    const bool known = std::any_of(kTables.begin(), kTables.end(),
                                   [&](const TableSpec& s) { return name == s.name; });
    if (!known) throw Error(ErrorCode::kSchema, "report: unknown table '" + name + "'");
  }

  auto load = [&](const char* artifact) -> std::optional<ojson> {
    const auto path = fs::path(a.run_dir) / artifact;
    if (!fs::exists(path)) return std::nullopt;
    return read_json_file(path);
  };
  const auto leak = load("leakage.json");

  ojson full;
  full["kind"] = "report";
  full["tables"] = ojson::object();
  for (const auto* spec : selected) {
    const auto art = load(spec->artifact);
    if (!art && !a.tables.empty()) {
      throw Error(ErrorCode::kIo, std::string("report: missing artifact ") + spec->artifact +
                                      "; run `biasaudit " + spec->producer + "` first");
    }
    CsvTable table({});
    try {
      table = build_table(spec->name, art, leak);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::kSchema,
                  std::string("report: artifact ") + spec->artifact + " has an unexpected layout");
    }
    std::string file = spec->name;
    std::replace(file.begin(), file.end(), '-', '_');
    write_file_atomic(fs::path(a.out) / (file + ".csv"), table.str());
    full["tables"][spec->name] = art ? *art : ojson(nullptr);
  }
  write_file_atomic(fs::path(a.out) / "report.json", full.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
  ValidateRequest request;
  std::string out;
};

int cmd_validate(const Common& common, ValidateArgs a, std::ostream& out, std::ostream& err) {
  if (!common.lexicon.empty()) a.request.lexicon = common.lexicon;
  const auto diag = validate_inputs(a.request);
  const auto report = validation_report_json(diag);
  if (a.out.empty()) {
    out << report.dump(2) << '\n';
  } else {
    write_file_atomic(a.out, report.dump(2) + "\n");
  }
  emit(err, diag);
  return diag.error_count() > 0 ? 1 : 0;
}

}  // namespace

// ---------------------------------------------------------------------------

Diagnostics validate_inputs(const ValidateRequest& r) {
  Diagnostics diag;
  auto attempt = [&diag](auto&& load) -> bool {
    try {
      load();
      return true;
    } catch (const Error& e) {
      diag.error(to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      diag.error("io", e.what());
    }
    return false;
  };

  GenderLexicon lexicon = GenderLexicon::Default();
  if (r.lexicon) attempt([&] { lexicon = GenderLexicon::Load(*r.lexicon); });

  std::optional<std::vector<CaptionRecord>> captions;
  std::optional<ContextIndex> contexts;
  std::optional<EmbeddingStore> vectors, emb;
  std::optional<LmSidecar> lm;
  std::optional<std::vector<TextRecord>> texts;
  if (r.captions) attempt([&] { captions = read_captions(*r.captions); });
  if (r.contexts) attempt([&] { contexts = ContextIndex(read_contexts(*r.contexts)); });
  if (r.vectors) attempt([&] { vectors = load_word_vectors(*r.vectors, &diag); });
  if (r.sidecar_emb) attempt([&] { emb = load_sidecar_vectors(*r.sidecar_emb); });
  if (r.sidecar_lm) attempt([&] { lm = LmSidecar::Load(*r.sidecar_lm); });
  if (r.text_records) attempt([&] { texts = read_text_records(*r.text_records); });

  std::set<std::string> reported;
  auto need_lm = [&](const std::string& key) {
    if (!reported.insert("lm:" + key).second) return;
    attempt([&] { hypothesis_probability(key, *lm); });
  };
  auto need_emb = [&](const std::string& key) {
    if (emb->contains(key) || !reported.insert("emb:" + key).second) return;
    diag.error(to_string(ErrorCode::kMissingKey),
               "embedding sidecar has no vector for '" + key + "'");
  };

  if (captions) {
    std::set<std::string> images;
    for (const auto& c : *captions) {
      images.insert(c.image_id);
      const auto label = label_caption_gender(c.text, lexicon);
      std::vector<std::string> keys;
      if (c.mask_present()) {
        keys = {variant_key(c, GenderClass::kMan), variant_key(c, GenderClass::kWoman)};
        if (r.include_neutral) keys.push_back(variant_key(c, GenderClass::kNeutral));
      } else if (label != GenderClass::kMixed) {
        keys = {c.id};
      }
      if (lm) {
        for (const auto& k : keys) need_lm(k);
      }
      if (emb && contexts) {
        const auto* ctx = contexts->find(c.image_id);
        if (ctx != nullptr && !ctx->objects.empty()) {
          for (const auto& k : keys) need_emb(k);
          for (const auto& o : ctx->objects) need_emb(o.label);
        }
      }
      if (emb && r.sentence_level && !c.mask_present() && label != GenderClass::kMixed) {
        need_emb(c.id);
      }
    }
    if (contexts) {
      for (const auto& ctx : contexts->all()) {
        if (!images.count(ctx.image_id)) {
          diag.warn("orphan_context", "context for image '" + ctx.image_id +
                                          "' matches no caption");
        }
      }
    }
  }
  if (emb && r.sentence_level) {
    for (auto g : {GenderClass::kMan, GenderClass::kWoman, GenderClass::kNeutral}) {
      need_emb(lexicon.anchor_phrase(g));
    }
  }
  if (vectors) {
    for (auto g : {GenderClass::kMan, GenderClass::kWoman, GenderClass::kNeutral}) {
      if (!vectors->contains(lexicon.canonical_term(g))) {
        diag.error(to_string(ErrorCode::kMissingKey),
                   "word vectors have no entry for '" + lexicon.canonical_term(g) + "'");
      }
    }
  }
  if (texts) {
    for (const auto& t : *texts) {
      for (auto g : {GenderClass::kMan, GenderClass::kWoman}) {
        const auto key = t.id + "#" + std::string(variant_suffix(g));
        if (lm) need_lm(key);
        if (emb && t.keyword) need_emb(key);
      }
      if (emb && t.keyword) need_emb(*t.keyword);
    }
  }
  return diag;
}

ojson validation_report_json(const Diagnostics& diag) {
  ojson j;
  j["kind"] = "validation";
  j["error_count"] = diag.error_count();
  j["warning_count"] = diag.warning_count();
  j["diagnostics"] = ojson::array();
  for (const auto& d : diag.entries()) j["diagnostics"].push_back(ojson::parse(to_json_line(d)));
  return j;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gender bias audit for caption corpora", "biasaudit"};
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.require_subcommand(1);
  Common common;
  app.add_option("--lexicon", common.lexicon, "Lexicon JSON (default: built-in)");
  app.add_option("--threads", common.threads, "Worker threads (0 = auto; capped by BIASAUDIT_THREADS)")
      ->check(CLI::NonNegativeNumber);

  const auto strategies = CLI::IsMember({"max_sim", "mean_topk"});

  FilterArgs filter;
  auto* fc = app.add_subcommand("filter-context", "Threshold, vote and truncate visual context");
  fc->add_option("--contexts", filter.contexts, "Raw visual_context.jsonl")->required();
  fc->add_option("--vectors", filter.vectors, "Word vectors used for label voting")->required();
  fc->add_option("--out", filter.out, "Filtered visual_context.jsonl")->required();
  fc->add_option("--conf-threshold", filter.conf, "Minimum confidence")->check(CLI::Range(0.0, 1.0));
  fc->add_option("--vote-threshold", filter.vote, "Cosine at which labels merge")
      ->check(CLI::Range(0.0, 1.0));
  fc->add_option("--k", filter.k, "Objects kept per image")->check(CLI::PositiveNumber);

  DistanceArgs dist;
  auto* dc = app.add_subcommand("distance", "Average gender-object similarity table");
  dc->add_option("--level", dist.level)->check(CLI::IsMember({"word", "sentence"}));
  dc->add_option("--vectors", dist.vectors, "Word vectors (word level)");
  dc->add_option("--sidecar", dist.sidecar, "Embedding sidecar (sentence level)");
  dc->add_option("--captions", dist.captions)->required();
  dc->add_option("--contexts", dist.contexts)->required();
  dc->add_option("--out", dist.out, "JSON output; a .csv sibling is written too")->required();
  dc->add_option("--source", dist.source)->check(CLI::IsMember({"model", "human", "all"}));
  dc->add_option("--top-n", dist.top_n, "Objects per gender in the ranking");

  ScoreArgs score;
  auto* sc = app.add_subcommand("score", "Belief-revision gender score per caption and gender");
  sc->add_option("--captions", score.captions)->required();
  sc->add_option("--contexts", score.contexts)->required();
  sc->add_option("--sidecar-emb", score.sidecar_emb)->required();
  sc->add_option("--sidecar-lm", score.sidecar_lm)->required();
  sc->add_option("--strategy", score.strategy)->check(strategies);
  sc->add_flag("--include-neutral", score.include_neutral, "Also score #person variants");
  sc->add_option("--out", score.out, "Scored JSONL; a .summary.json sibling is written too")
      ->required();

  EstimateArgs est;
  auto* ec = app.add_subcommand("estimate", "Predict the masked gender by revised argmax");
  ec->add_option("--captions", est.captions)->required();
  ec->add_option("--contexts", est.contexts)->required();
  ec->add_option("--sidecar-emb", est.sidecar_emb)->required();
  ec->add_option("--sidecar-lm", est.sidecar_lm)->required();
  ec->add_option("--strategy", est.strategy)->check(strategies);
  ec->add_flag("--include-neutral", est.include_neutral, "Report the #person score too");
  ec->add_option("--tie-epsilon", est.tie_epsilon)->check(CLI::NonNegativeNumber);
  ec->add_option("--out", est.out, "Prediction JSONL; a .summary.json sibling is written too")
      ->required();

  CoocArgs cooc;
  auto* cc = app.add_subcommand("cooc", "Object-gender co-occurrence counts");
  cc->add_option("--captions", cooc.captions)->required();
  cc->add_option("--source", cooc.source)->check(CLI::IsMember({"model", "human", "all"}));
  cc->add_option("--filter", cooc.filter, "Count only captions mentioning this object");
  cc->add_option("--object", cooc.objects, "Emit a per-object bias row (repeatable)");
  cc->add_option("--scores", cooc.scores, "Scored JSONL from `score` for gender-score rows");
  cc->add_option("--out", cooc.out)->required();

  LeakageArgs leak;
  auto* lc = app.add_subcommand("leakage", "Model over human gender mention counts");
  lc->add_option("--model", leak.model, "cooc summary of model captions")->required();
  lc->add_option("--human", leak.human, "cooc summary of human captions")->required();
  lc->add_option("--out", leak.out)->required();

  ReportArgs rep;
  auto* rc = app.add_subcommand("report", "Assemble CSV/JSON tables from a run directory");
  rc->add_option("--run-dir", rep.run_dir)->required();
  rc->add_option("--out", rep.out, "Output directory")->required();
  rc->add_option("--table", rep.tables, "Restrict to these tables; missing artifacts are errors");

  ValidateArgs val;
  std::string v_captions, v_contexts, v_vectors, v_emb, v_lm, v_text, v_level;
  auto* vc = app.add_subcommand("validate", "Schema and key-coverage checks");
  vc->add_option("--captions", v_captions);
  vc->add_option("--contexts", v_contexts);
  vc->add_option("--vectors", v_vectors);
  vc->add_option("--sidecar-emb", v_emb);
  vc->add_option("--sidecar-lm", v_lm);
  vc->add_option("--text-records", v_text);
  vc->add_option("--level", v_level, "Also require sentence-level keys")
      ->check(CLI::IsMember({"word", "sentence"}));
  vc->add_flag("--include-neutral", val.request.include_neutral);
  vc->add_option("--out", val.out, "Report path (default: stdout)");

  TextScoreArgs text;
  auto* tc = app.add_subcommand("text-score", "Gender score for text with a context keyword");
  tc->add_option("--records", text.records)->required();
  tc->add_option("--sidecar-emb", text.sidecar_emb);
  tc->add_option("--sidecar-lm", text.sidecar_lm)->required();
  tc->add_option("--keyword-confidence", text.default_confidence,
                 "P(context) for keywords without their own confidence")
      ->check(CLI::Range(0.0, 1.0));
  tc->add_option("--tie-epsilon", text.tie_epsilon)->check(CLI::NonNegativeNumber);
  tc->add_option("--out", text.out)->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << to_json_line({Severity::kError, "usage", e.what()}) << '\n';
    return 1;
  }

  try {
    if (*fc) return cmd_filter_context(common, filter, err);
    if (*dc) return cmd_distance(common, dist, err);
    if (*sc) return cmd_score(common, score);
    if (*ec) return cmd_estimate(common, est, err);
    if (*cc) return cmd_cooc(common, cooc);
    if (*lc) return cmd_leakage(leak);
    if (*rc) return cmd_report(rep);
    if (*tc) return cmd_text_score(common, text);
    if (*vc) {
      auto opt = [](const std::string& s) {
        return s.empty() ? std::nullopt : std::optional<fs::path>(s);
      };
      val.request.captions = opt(v_captions);
      val.request.contexts = opt(v_contexts);
      val.request.vectors = opt(v_vectors);
      val.request.sidecar_emb = opt(v_emb);
      val.request.sidecar_lm = opt(v_lm);
      val.request.text_records = opt(v_text);
      val.request.sentence_level = v_level == "sentence";
      return cmd_validate(common, val, out, err);
    }
  } catch (const Error& e) {
    err << to_json_line({Severity::kError, to_string(e.code()), e.what()}) << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << to_json_line({Severity::kError, "runtime", e.what()}) << '\n';
    return 2;
  }
  return 2;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace biasaudit
