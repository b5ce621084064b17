#include "biasaudit/context.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "biasaudit/dataset.h"
#include "biasaudit/diagnostics.h"
#include "biasaudit/vectors.h"
#include "test_util.h"

namespace biasaudit {
namespace {

const GenderLexicon& lex() {
  static const GenderLexicon l = GenderLexicon::Default();
  return l;
}

// Unit vectors at distinct angles; motorbike sits ~0.99 from motorcycle.
const EmbeddingStore& store() {
  static const EmbeddingStore s = [] {
    EmbeddingStore e(3);
    e.insert("dog", {1, 0, 0});
    e.insert("umbrella", {0, 1, 0});
    e.insert("motorcycle", {0, 0, 1});
    e.insert("motorbike", {0, 0.1, 1});
    e.insert("kite", {1, 1, 0});
    e.insert("car", {1, 0, 1});
    e.insert("cake", {0, 1, 1});
    e.insert("bench", {1, -1, 0});
    e.insert("person", {1, 1, 1});
    e.insert("tennis", {0.5, 0, -1});
    e.insert("ball", {-1, 0.2, 0});
    return e;
  }();
  return s;
}

VisualContext ctx(std::vector<ContextObject> objs) { return {"img", std::move(objs)}; }

TEST(FilterContext, LowConfidenceDropped) {
  auto out = filter_context(ctx({{"dog", 0.15, "A"}}), store(), lex());
  EXPECT_TRUE(out.objects.empty());
  EXPECT_EQ(out.image_id, "img");
}

TEST(FilterContext, PersonCategoryDropped) {
  auto out = filter_context(ctx({{"person", 0.9, "A"}, {"umbrella", 0.6, "B"}}), store(), lex());
  ASSERT_EQ(out.objects.size(), 1u);
  EXPECT_EQ(out.objects[0], (ContextObject{"umbrella", 0.6, "B"}));
  out = filter_context(ctx({{"young boy", 0.9, "A"}, {"Tennis Player", 0.8, "B"}}), store(),
                       lex());
  EXPECT_TRUE(out.objects.empty());
}

TEST(FilterContext, TopKByConfidence) {
  auto out = filter_context(ctx({{"dog", 0.3, "A"},
                                 {"umbrella", 0.9, "A"},
                                 {"kite", 0.5, "B"},
                                 {"cake", 0.7, "C"},
                                 {"motorcycle", 0.4, "A"}}),
                            store(), lex());
  ASSERT_EQ(out.objects.size(), 3u);
  EXPECT_EQ(out.objects[0].label, "umbrella");
  EXPECT_EQ(out.objects[1].label, "cake");
  EXPECT_EQ(out.objects[2].label, "kite");
}

TEST(FilterContext, VotingAbsorbsNearSynonyms) {
  auto out = filter_context(
      ctx({{"motorbike", 0.6, "B"}, {"motorcycle", 0.8, "A"}, {"dog", 0.5, "C"}}), store(),
      lex());
  ASSERT_EQ(out.objects.size(), 2u);
  EXPECT_EQ(out.objects[0].label, "motorcycle");
  EXPECT_EQ(out.objects[1].label, "dog");
}

TEST(FilterContext, IdenticalLabelsAbsorbedAndTieBreak) {
  auto out = filter_context(ctx({{"dog", 0.5, "C"}, {"dog", 0.5, "A"}}), store(), lex());
  ASSERT_EQ(out.objects.size(), 1u);
  EXPECT_EQ(out.objects[0].classifier, "A");
}

TEST(FilterContext, MissingVectorWarnsAndNeverAbsorbs) {
  Diagnostics diag;
  auto out = filter_context(
      ctx({{"zebra", 0.9, "A"}, {"giraffe", 0.8, "B"}, {"zebra", 0.7, "C"}}), store(), lex(),
      {}, &diag);
  ASSERT_EQ(out.objects.size(), 2u);
  EXPECT_EQ(out.objects[0].label, "zebra");
  EXPECT_EQ(out.objects[1].label, "giraffe");
  EXPECT_EQ(diag.warning_count(), 2u);
}

TEST(FilterContext, OptionsRespected) {
  ContextFilterOptions opt;
  opt.k = 1;
  opt.conf_threshold = 0.5;
  auto out = filter_context(ctx({{"dog", 0.45, "A"}, {"kite", 0.5, "A"}}), store(), lex(), opt);
  ASSERT_EQ(out.objects.size(), 1u);
  EXPECT_EQ(out.objects[0].label, "kite");
}

// Random candidate lists drawn from the store vocabulary plus OOV and person
// labels, with confidences on a coarse grid so ties are common.
std::vector<ContextObject> random_candidates(std::mt19937& rng) {
  static const std::vector<std::string> labels = {
      "dog",  "umbrella", "motorcycle", "motorbike", "kite",   "car",  "cake",
      "bench", "person",  "tennis ball", "zebra",    "a girl", "ball", "man"};
  static const std::vector<std::string> classifiers = {"resnet", "clip", "frcnn"};
  std::vector<ContextObject> out;
  std::size_t n = rng() % 10;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({labels[rng() % labels.size()], static_cast<double>(rng() % 11) / 10.0,
                   classifiers[rng() % classifiers.size()]});
  }
  return out;
}

TEST(FilterContext, InvariantsProperty) {
  std::mt19937 rng(1234);
  for (int trial = 0; trial < 2000; ++trial) {
    auto cands = random_candidates(rng);
    auto out = filter_context(ctx(cands), store(), lex());
    EXPECT_LE(out.objects.size(), 3u);
    for (const auto& o : out.objects) {
      EXPECT_GE(o.confidence, 0.2);
      for (const auto& t : tokenize(o.label)) EXPECT_FALSE(lex().contains(t)) << o.label;
      EXPECT_NE(std::find(cands.begin(), cands.end(), o), cands.end());
    }
    // Idempotence.
    EXPECT_EQ(filter_context(out, store(), lex()), out);
    // Order independence.
    auto shuffled = cands;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(filter_context(ctx(shuffled), store(), lex()), out);
  }
}

TEST(FilterContext, FixtureDuplicatesCollapse) {
  auto raw = read_contexts(testutil::fixture("corpus/contexts_raw.jsonl"));
  auto vecs = load_word_vectors(testutil::fixture("corpus/word_vectors.txt"));
  for (const auto& c : raw) {
    auto out = filter_context(c, vecs, lex());
    EXPECT_LE(out.objects.size(), 3u);
    for (std::size_t i = 0; i < out.objects.size(); ++i) {
      for (std::size_t j = i + 1; j < out.objects.size(); ++j) {
        EXPECT_NE(out.objects[i].label, out.objects[j].label);
        EXPECT_FALSE(out.objects[i].label == "motorbike" && out.objects[j].label == "motorcycle");
        EXPECT_FALSE(out.objects[i].label == "motorcycle" && out.objects[j].label == "motorbike");
      }
    }
  }
}

}  // namespace
}  // namespace biasaudit
