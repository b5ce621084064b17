#include "biasaudit/revision.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "biasaudit/dataset.h"
#include "biasaudit/diagnostics.h"
#include "fixture_corpus.h"
#include "oracle.h"
#include "test_util.h"

namespace biasaudit {
namespace {

using testutil::TempDir;
using testutil::write_text;

TEST(Hypothesis, Examples) {
  LmSidecar lm;
  lm.insert("a", {0.2, {}});
  lm.insert("b", {std::nullopt, {std::log(0.5), std::log(0.1)}});
  lm.insert("c", {0.0, {}});
  lm.insert("d", {std::nullopt, {}});
  EXPECT_EQ(hypothesis_probability("a", lm), 0.2);
  EXPECT_NEAR(hypothesis_probability("b", lm), 0.3, 1e-15);
  EXPECT_EQ(hypothesis_probability("c", lm), kProbabilityFloor);
  try {
    hypothesis_probability("zzz", lm);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingKey);
  }
  try {
    hypothesis_probability("d", lm);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
  }
}

TEST(LmSidecar, LoadValidates) {
  TempDir dir;
  write_text(dir / "ok.jsonl",
             "{\"_manifest\":{\"model\":\"gpt2\",\"revision\":\"x\"}}\n"
             "{\"key\":\"a\",\"mean_token_prob\":0.25}\n"
             "{\"key\":\"b\",\"token_logprobs\":[-0.1,-2.0]}\n");
  EXPECT_EQ(LmSidecar::Load(dir / "ok.jsonl").size(), 2u);
  write_text(dir / "dup.jsonl",
             "{\"key\":\"a\",\"mean_token_prob\":0.25}\n{\"key\":\"a\",\"mean_token_prob\":0.3}\n");
  EXPECT_THROW(LmSidecar::Load(dir / "dup.jsonl"), Error);
  write_text(dir / "range.jsonl", "{\"key\":\"a\",\"mean_token_prob\":1.5}\n");
  EXPECT_THROW(LmSidecar::Load(dir / "range.jsonl"), Error);
  write_text(dir / "pos.jsonl", "{\"key\":\"a\",\"token_logprobs\":[0.5]}\n");
  EXPECT_THROW(LmSidecar::Load(dir / "pos.jsonl"), Error);
  write_text(dir / "none.jsonl", "{\"key\":\"a\"}\n");
  EXPECT_THROW(LmSidecar::Load(dir / "none.jsonl"), Error);
}

TEST(Alpha, Examples) {
  for (double p : {0.0, 0.3, 0.99, 1.0}) EXPECT_EQ(alpha(0.0, p), 1.0);
  EXPECT_EQ(alpha(1.0, 0.5), 0.0);
  EXPECT_EQ(alpha(1.0, 1.0), 1.0);
  // (1/3)^0.2 by logs: exp(-0.2 ln 3).
  const long double expected = std::exp(-0.2L * std::log(3.0L));
  EXPECT_NEAR(alpha(0.5, 0.8), static_cast<double>(expected), 1e-15);
  EXPECT_NEAR(alpha(0.5, 0.8), 0.8027415618, 1e-10);
  EXPECT_EQ(alpha(-0.4, 0.5), 1.0);
}

TEST(Revise, Examples) {
  for (double p : {1e-12, 0.2, 0.5, 1.0}) {
    EXPECT_EQ(revise(p, 1.0), p);
    EXPECT_EQ(revise(p, 0.0), 1.0);
  }
  EXPECT_NEAR(revise(0.5, 0.8027), 0.5732753, 1e-7);
  EXPECT_NEAR(revise(0.5, 0.8027), std::exp(0.8027 * std::log(0.5)), 1e-15);
  EXPECT_THROW(revise(0.0, 0.5), Error);
}

TEST(Revise, PropertySuite) {
  std::mt19937_64 rng(2023);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    double p = 1.0 - u(rng);  // (0, 1]
    double s1 = u(rng), s2 = u(rng);
    double c1 = u(rng), c2 = u(rng);
    if (s1 > s2) std::swap(s1, s2);
    if (c1 > c2) std::swap(c1, c2);
    double a = alpha(s1, c1);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    double sc = revise(p, a);
    EXPECT_GE(sc, p);
    EXPECT_LE(sc, 1.0);
    EXPECT_LE(sc, revise(p, alpha(s2, c1)));  // non-decreasing in sim
    EXPECT_GE(sc, revise(p, alpha(s1, c2)));  // non-increasing in confidence
    EXPECT_NEAR(sc, std::pow(p, a), 1e-10);
    EXPECT_NEAR(a, static_cast<double>(oracle::alpha(s1, c1)), 1e-12);
  }
}

TEST(Revise, StrictlyIncreasingInterior) {
  double prev = revise(0.3, alpha(0.01, 0.4));
  for (int i = 2; i < 100; ++i) {
    double cur = revise(0.3, alpha(i / 100.0, 0.4));
    EXPECT_GT(cur, prev);
    prev = cur;
  }
}

// Text variant "c#man" and two objects at controlled angles from it.
struct Scene {
  EmbeddingStore emb{2};
  LmSidecar lm;
  Scene() {
    emb.insert("c#man", {1, 0});
    emb.insert("c#woman", {0, 1});
    // cos = 0.6 and 0.3 with c#man
    emb.insert("kite", {0.6, 0.8});
    emb.insert("dog", {0.3, std::sqrt(1 - 0.09)});
    lm.insert("c#man", {0.2, {}});
    lm.insert("c#woman", {0.1, {}});
  }
  Sidecars sidecars() const { return {&emb, &lm}; }
};

const CaptionRecord kMasked{"c", "i", "a <MASK> with a kite", CaptionSource::kModel};

TEST(ScoreCaption, EmptyContextBacksOff) {
  Scene s;
  VisualContext empty{"i", {}};
  auto r = score_caption(kMasked, GenderClass::kMan, &empty, s.sidecars());
  EXPECT_EQ(r.score, 0.2);
  EXPECT_EQ(r.alpha, 1.0);
  EXPECT_EQ(r.key, "c#man");
  EXPECT_FALSE(r.object_label.has_value());
  EXPECT_EQ(score_caption(kMasked, GenderClass::kMan, nullptr, s.sidecars()).score, 0.2);
}

TEST(ScoreCaption, SingleObjectExample) {
  Scene s;
  VisualContext ctx{"i", {{"kite", 0.5, "A"}}};
  auto r = score_caption(kMasked, GenderClass::kMan, &ctx, s.sidecars());
  EXPECT_NEAR(r.sim, 0.6, 1e-15);
  EXPECT_NEAR(r.alpha, 0.5, 1e-15);
  EXPECT_NEAR(r.score, std::sqrt(0.2), 1e-15);
  EXPECT_NEAR(r.score, 0.4472, 1e-4);
}

TEST(ScoreCaption, MaxSimPicksStrongest) {
  Scene s;
  VisualContext ctx{"i", {{"dog", 0.9, "A"}, {"kite", 0.5, "A"}}};
  auto r = score_caption(kMasked, GenderClass::kMan, &ctx, s.sidecars());
  EXPECT_EQ(r.object_label, "kite");
  ASSERT_EQ(r.evidence.size(), 2u);
  EXPECT_EQ(r.evidence[0].label, "dog");
}

TEST(ScoreCaption, MeanTopKAverages) {
  Scene s;
  VisualContext ctx{"i", {{"dog", 0.5, "A"}, {"kite", 0.5, "A"}}};
  auto r = score_caption(kMasked, GenderClass::kMan, &ctx, s.sidecars(),
                         SelectionStrategy::kMeanTopK);
  double expected = (std::pow(0.2, static_cast<double>(oracle::alpha(0.3, 0.5))) +
                     std::pow(0.2, static_cast<double>(oracle::alpha(0.6, 0.5)))) /
                    2;
  EXPECT_NEAR(r.score, expected, 1e-14);
  EXPECT_NEAR(r.sim, 0.45, 1e-15);
  EXPECT_NEAR(std::pow(0.2, r.alpha), r.score, 1e-14);
}

TEST(ScoreCaption, MissingKeysNamed) {
  Scene s;
  VisualContext ctx{"i", {{"zebra", 0.5, "A"}}};
  try {
    score_caption(kMasked, GenderClass::kMan, &ctx, s.sidecars());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingKey);
    EXPECT_NE(std::string(e.what()).find("zebra"), std::string::npos);
  }
  VisualContext kite{"i", {{"kite", 0.5, "A"}}};
  try {
    score_caption(kMasked, GenderClass::kNeutral, &kite, s.sidecars());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingKey);
    EXPECT_NE(std::string(e.what()).find("c#person"), std::string::npos);
  }
}

TEST(GenderScore, Aggregates) {
  std::vector<ScoredCaption> scored(3);
  scored[0].gender = GenderClass::kMan;
  scored[0].score = 0.4;
  scored[1].gender = GenderClass::kWoman;
  scored[1].score = 0.2;
  scored[2].gender = GenderClass::kMan;
  scored[2].score = 0.6;
  auto m = gender_score(scored, GenderClass::kMan);
  EXPECT_EQ(m.count, 2);
  EXPECT_NEAR(*m.mean_score, 0.5, 1e-15);
  EXPECT_EQ(*gender_score(std::span(scored).subspan(1, 1), GenderClass::kWoman).mean_score, 0.2);
  EXPECT_FALSE(gender_score({}, GenderClass::kMan).mean_score.has_value());
  auto summary = summarize_scores(scored);
  EXPECT_NEAR(*summary.to_m, 0.5 / 0.7, 1e-15);
  EXPECT_EQ(*summary.to_m + *summary.to_w, 1.0);
  EXPECT_FALSE(summary.man_to_neutral.has_value());
}

TEST(GenderScore, NoContextEqualsMeanHypothesis) {
  const auto& fx = testfixture::corpus();
  ContextIndex none;
  auto run = score_dataset(fx.captions, none, GenderLexicon::Default(), {&fx.emb, &fx.lm});
  long double sum = 0;
  long long n = 0;
  for (const auto& s : run.scored) {
    if (s.gender != GenderClass::kMan) continue;
    EXPECT_EQ(s.alpha, 1.0);
    sum += oracle::hypothesis(*fx.lm.find(s.key));
    ++n;
  }
  auto m = gender_score(run.scored, GenderClass::kMan);
  EXPECT_EQ(m.count, n);
  EXPECT_NEAR(*m.mean_score, static_cast<double>(sum / n), 1e-12);
}

TEST(GenderScore, FixtureMatchesOracle) {
  const auto& fx = testfixture::corpus();
  auto run = score_dataset(fx.captions, ContextIndex(fx.contexts), GenderLexicon::Default(),
                           {&fx.emb, &fx.lm});
  auto o = oracle::gender_scores(fx.captions, fx.context_map, oracle::default_lexicon(), fx.emb,
                                 fx.lm);
  auto m = gender_score(run.scored, GenderClass::kMan);
  auto w = gender_score(run.scored, GenderClass::kWoman);
  auto p = gender_score(run.scored, GenderClass::kNeutral);
  EXPECT_EQ(m.count, o.man.n);
  EXPECT_EQ(w.count, o.woman.n);
  EXPECT_EQ(p.count, o.neutral.n);
  EXPECT_NEAR(*m.mean_score, *o.man.mean(), 1e-12);
  EXPECT_NEAR(*w.mean_score, *o.woman.mean(), 1e-12);
  EXPECT_NEAR(*p.mean_score, *o.neutral.mean(), 1e-12);
}

TEST(ScoreDataset, WorkerCountInvisible) {
  const auto& fx = testfixture::corpus();
  ContextIndex ctx(fx.contexts);
  auto lexicon = GenderLexicon::Default();
  auto base = score_dataset(fx.captions, ctx, lexicon, {&fx.emb, &fx.lm});
  for (int workers : {2, 8}) {
    ScoreOptions opt;
    opt.workers = workers;
    auto run = score_dataset(fx.captions, ctx, lexicon, {&fx.emb, &fx.lm}, opt);
    ASSERT_EQ(run.scored.size(), base.scored.size());
    for (std::size_t i = 0; i < run.scored.size(); ++i) {
      EXPECT_EQ(run.scored[i].key, base.scored[i].key);
      EXPECT_EQ(run.scored[i].score, base.scored[i].score);
    }
    EXPECT_EQ(run.mixed_skipped, base.mixed_skipped);
  }
}

}  // namespace
}  // namespace biasaudit
