// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "biasaudit/context.h"
#include "biasaudit/cooc.h"
#include "biasaudit/dataset.h"
#include "biasaudit/distance.h"
#include "biasaudit/estimate.h"
#include "biasaudit/format.h"
#include "biasaudit/parallel.h"
#include "biasaudit/revision.h"
#include "fixture_corpus.h"
#include "oracle.h"
#include "pipeline.h"
#include "test_util.h"

namespace {

using namespace biasaudit;
using Clock = std::chrono::steady_clock;

constexpr double kRatioTol = 0.005;
constexpr double kLeakageTol = 0.01;
constexpr double kPowTol = 1e-10;
constexpr double kMeanTol = 1e-12;
constexpr double kTimeLimitSeconds = 5.0;
constexpr int kPropertyTriples = 10000;

struct Check {
  bool ok = true;
  std::string detail;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

Check bias_ratio_counts() {
  Check c;
  double a = *bias_ratio_to_m(792, 408);
  double b = *bias_ratio_to_m(527, 213);
  c.expect(std::fabs(a - 0.66) <= kRatioTol, "792/408 gave " + fmt(a));
  c.expect(std::fabs(b - 0.71) <= kRatioTol, "527/213 gave " + fmt(b));
  c.detail = c.ok ? "792/408=" + fmt(a) + " 527/213=" + fmt(b) : c.detail;
  return c;
}

Check leakage_counts() {
  Check c;
  double m = *leakage(792, 930);
  double w = *leakage(408, 291);
  c.expect(std::fabs(m - 0.85) <= kLeakageTol, "792/930 gave " + fmt(m));
  c.expect(std::fabs(w - 1.40) <= kLeakageTol, "408/291 gave " + fmt(w));
  c.detail = c.ok ? "m=" + fmt(m) + " w=" + fmt(w) : c.detail;
  return c;
}

Check supplied_score_ratio() {
  Check c;
  for (auto [m, w] : {std::pair{0.31, 0.27}, std::pair{0.15, 0.13}}) {
    const double r = *bias_ratio_to_m(m, w);
    const double err = std::fabs(r - 0.53);
    c.expect(err <= kRatioTol, fmt(m) + "/" + fmt(w) + " gave " + fmt(r) + ", off by " +
                                   fmt(err) + " > " + fmt(kRatioTol) +
                                   " (two-decimal table value " + format_table_value(r) + ")");
    if (c.ok) c.detail += (c.detail.empty() ? "" : " and ") + fmt(r);
  }
  return c;
}

Check revision_properties() {
  Check c;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20231016);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < kPropertyTriples && c.ok; ++i) {
    const double p = 1.0 - u(rng);  // (0, 1]
    double s1 = u(rng), s2 = u(rng), c1 = u(rng), c2 = u(rng);
    if (s1 > s2) std::swap(s1, s2);
    if (c1 > c2) std::swap(c1, c2);
    const double a = alpha(s1, c1);
    const double score = revise(p, a);
    const std::string at = " at p=" + fmt(p) + " sim=" + fmt(s1) + " c=" + fmt(c1);
    c.expect(a >= 0.0 && a <= 1.0, "alpha out of [0,1]" + at);
    c.expect(score >= p && score <= 1.0, "score out of [p,1]" + at);
    c.expect(score <= revise(p, alpha(s2, c1)), "score decreased in sim" + at);
    c.expect(score >= revise(p, alpha(s1, c2)), "score increased in confidence" + at);
    c.expect(revise(p, 1.0) == p, "revise(p,1) != p" + at);
    c.expect(revise(p, 0.0) == 1.0, "revise(p,0) != 1" + at);
    c.expect(std::fabs(score - std::pow(p, a)) <= kPowTol, "log-domain vs pow" + at);
  }
  const double secs = seconds_since(t0);
  c.expect(secs < kTimeLimitSeconds, "took " + fmt(secs) + " s");
  if (c.ok) c.detail = std::to_string(kPropertyTriples) + " triples in " + fmt(secs) + " s";
  return c;
}

bool near_opt(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::fabs(*a - *b) <= kMeanTol;
}

Check oracle_equivalence() {
  Check c;
  const auto t0 = Clock::now();
  const auto& fx = testfixture::corpus();
  const auto lexicon = GenderLexicon::Default();
  const auto olex = oracle::default_lexicon();
  const ContextIndex contexts(fx.contexts);
  c.expect(fx.captions.size() == 100, "fixture has " + std::to_string(fx.captions.size()));

  const auto counts = cooc_counts(fx.captions, lexicon);
  const auto oc = oracle::cooc(fx.captions, olex);
  c.expect(counts.man == oc.man && counts.woman == oc.woman && counts.neutral == oc.neutral &&
               counts.mixed == oc.mixed,
           "cooc_counts differ");
  for (const auto& ctx : fx.contexts) {
    for (const auto& o : ctx.objects) {
      const auto f = cooc_counts(fx.captions, lexicon, o.label);
      const auto of = oracle::cooc(fx.captions, olex, o.label);
      c.expect(f.man == of.man && f.woman == of.woman, "cooc_counts differ for " + o.label);
    }
  }

  for (bool sentence : {false, true}) {
    DistanceOptions opt;
    opt.level = sentence ? DistanceLevel::kSentence : DistanceLevel::kWord;
    const auto& store = sentence ? fx.emb : fx.words;
    const auto table = aggregate_distance_table(fx.captions, contexts, lexicon, store, opt);
    const auto od = oracle::distance(fx.captions, fx.context_map, olex, store, sentence);
    const std::string level = sentence ? "sentence" : "word";
    auto same = [&](const GenderDistanceRow& r, const oracle::DistanceRow& o) {
      return r.man.count == o.man.n && r.woman.count == o.woman.n &&
             r.person.count == o.person.n && near_opt(r.man.mean(), o.man.mean()) &&
             near_opt(r.woman.mean(), o.woman.mean()) && near_opt(r.person.mean(), o.person.mean());
    };
    c.expect(same(table.corpus, od.at("")), level + " corpus row differs");
    c.expect(table.rows.size() + 1 == od.size(), level + " row count differs");
    for (const auto& row : table.rows) {
      auto it = od.find(row.subject);
      c.expect(it != od.end() && same(row, it->second), level + " row differs: " + row.subject);
    }
  }

  const auto run = score_dataset(fx.captions, contexts, lexicon, {&fx.emb, &fx.lm});
  const auto og = oracle::gender_scores(fx.captions, fx.context_map, olex, fx.emb, fx.lm);
  const std::array<const oracle::Column*, 3> ocols = {&og.man, &og.woman, &og.neutral};
  const std::array<GenderClass, 3> classes = {GenderClass::kMan, GenderClass::kWoman,
                                              GenderClass::kNeutral};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto agg = gender_score(run.scored, classes[k]);
    c.expect(agg.count == ocols[k]->n && near_opt(agg.mean_score, ocols[k]->mean()),
             std::string("gender_score differs for ") + std::string(to_string(classes[k])));
  }

  const auto report = estimation_report(fx.captions, contexts, {&fx.emb, &fx.lm});
  const auto oe = oracle::estimate(fx.captions, fx.context_map, fx.emb, fx.lm);
  c.expect(report.man == oe.man && report.woman == oe.woman && report.neutral == oe.neutral &&
               report.errors.empty(),
           "estimation_report counts differ");

  const double secs = seconds_since(t0);
  c.expect(secs < kTimeLimitSeconds, "took " + fmt(secs) + " s");
  if (c.ok) {
    c.detail = "cooc " + std::to_string(counts.man) + "/" + std::to_string(counts.woman) +
               ", estimate " + std::to_string(report.man) + "/" + std::to_string(report.woman) +
               "/" + std::to_string(report.neutral) + " in " + fmt(secs) + " s";
  }
  return c;
}

Check paddle_tennis_estimation() {
  Check c;
  using testutil::fixture;
  const auto captions = read_captions(fixture("paddle_tennis/captions.jsonl"));
  const ContextIndex contexts(read_contexts(fixture("paddle_tennis/contexts.jsonl")));
  const auto emb = load_sidecar_vectors(fixture("paddle_tennis/sidecar_emb.jsonl"));
  const auto lm = LmSidecar::Load(fixture("paddle_tennis/sidecar_lm.jsonl"));
  auto find = [&](const std::string& id) {
    return *std::find_if(captions.begin(), captions.end(),
                         [&](const CaptionRecord& r) { return r.id == id; });
  };
  const auto paddle = find("paddle");
  const auto tennis = find("tennis");
  const auto pp = estimate_gender(paddle, contexts.find(paddle.image_id), {&emb, &lm});
  const auto pt = estimate_gender(tennis, contexts.find(tennis.image_id), {&emb, &lm});
  constexpr double kScoreTol = 1e-6;
  c.expect(std::fabs(pp.score_man - 0.33) <= kScoreTol && std::fabs(pp.score_woman - 0.30) <= kScoreTol,
           "paddle scores " + fmt(pp.score_man) + "/" + fmt(pp.score_woman));
  c.expect(pp.predicted == GenderClass::kMan, "paddle predicted " + std::string(to_string(pp.predicted)));
  c.expect(std::fabs(pt.score_man - 0.45) <= kScoreTol && std::fabs(pt.score_woman - 0.45) <= kScoreTol,
           "tennis scores " + fmt(pt.score_man) + "/" + fmt(pt.score_woman));
  c.expect(pt.predicted == GenderClass::kNeutral,
           "tennis predicted " + std::string(to_string(pt.predicted)));
  if (c.ok) {
    c.detail = "paddle " + fmt(pp.score_man) + "/" + fmt(pp.score_woman) + " -> man, tennis " +
               fmt(pt.score_man) + "/" + fmt(pt.score_woman) + " -> neutral";
  }
  return c;
}

Check determinism() {
  Check c;
  const auto in = testutil::fixture("corpus");
  std::optional<std::map<std::string, std::string>> reference;
  std::size_t runs = 0;
  for (int threads : {1, 2, 8}) {
    for (int rep = 0; rep < 2; ++rep) {
      testutil::TempDir dir;
      for (const auto& s : testpipeline::run(in, dir.path(), threads)) {
        c.expect(s.exit_code == 0, s.name + " exited " + std::to_string(s.exit_code) + " with " +
                                       std::to_string(threads) + " threads");
      }
      auto snap = testpipeline::snapshot(dir.path());
      if (!reference) {
        reference = std::move(snap);
      } else {
        c.expect(snap.size() == reference->size(), "file set differs");
        for (const auto& [name, bytes] : *reference) {
          auto it = snap.find(name);
          c.expect(it != snap.end() && it->second == bytes,
                   name + " differs with " + std::to_string(threads) + " threads");
        }
      }
      ++runs;
    }
  }
  if (c.ok) {
    c.detail = std::to_string(reference->size()) + " files identical over " +
               std::to_string(runs) + " runs (1/2/8 threads; effective max " +
               std::to_string(resolve_workers(8)) + ")";
  }
  return c;
}

Check context_filter() {
  Check c;
  const auto lexicon = GenderLexicon::Default();
  const auto& fx = testfixture::corpus();
  std::vector<std::string> labels;
  for (const auto& raw : read_contexts(testutil::fixture("corpus/contexts_raw.jsonl"))) {
    for (const auto& o : raw.objects) labels.push_back(o.label);
  }
  for (const char* extra : {"person", "man", "young woman", "tennis player", "zebra"}) {
    labels.push_back(extra);
  }
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::size_t inputs = 0;
  for (int trial = 0; trial < 5000 && c.ok; ++trial) {
    VisualContext v{"img", {}};
    const std::size_t n = rng() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      double p = trial % 2 ? conf(rng) : static_cast<double>(rng() % 11) / 10.0;
      v.objects.push_back({labels[rng() % labels.size()], p, "clf" + std::to_string(rng() % 3)});
    }
    inputs += n;
    const auto out = filter_context(v, fx.words, lexicon);
    c.expect(out.objects.size() <= 3, "more than 3 objects kept");
    for (const auto& o : out.objects) {
      c.expect(o.confidence >= 0.2, "kept confidence " + fmt(o.confidence));
      for (const auto& t : tokenize(o.label)) {
        c.expect(!lexicon.contains(t), "kept person-category label '" + o.label + "'");
      }
    }
  }
  if (c.ok) c.detail = "5000 candidate lists, " + std::to_string(inputs) + " candidates";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Check()>>> criteria = {
      {"bias ratio on reference counts", bias_ratio_counts},
      {"leakage on reference counts", leakage_counts},
      {"bias ratio on supplied similarity scores", supplied_score_ratio},
      {"belief-revision property suite", revision_properties},
      {"oracle equivalence on the 100-caption fixture", oracle_equivalence},
      {"estimation on the paddle / tennis fixture", paddle_tennis_estimation},
      {"determinism across runs and worker counts", determinism},
      {"context filter threshold, person and top-k", context_filter},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %s: %s\n", c.ok ? "PASS" : "FAIL", name, c.detail.c_str());
    if (!c.ok) ++failed;
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
