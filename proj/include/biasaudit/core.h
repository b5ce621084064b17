#ifndef BIASAUDIT_CORE_H_
#define BIASAUDIT_CORE_H_

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace biasaudit {

enum class GenderClass { kMan, kWoman, kNeutral, kMixed };

// "man", "woman", "neutral", "mixed".
std::string_view to_string(GenderClass g);

// Accepts the to_string() names plus "person" as an alias for kNeutral.
std::optional<GenderClass> parse_gender(std::string_view name);

// Suffix used in sidecar keys for filled variants: "man", "woman", "person".
std::string_view variant_suffix(GenderClass g);

// Lowercases ASCII and splits on anything that is not [a-z0-9]. Bytes >= 0x80
// are kept inside tokens so UTF-8 sequences are never split.
std::vector<std::string> tokenize(std::string_view text);

inline constexpr std::string_view kMaskToken = "<MASK>";

// Three disjoint, non-empty term lists plus one anchor phrase per class.
// Term order matters: the first term of each list is the canonical surface
// form used for mask filling and word-level distances.
class GenderLexicon {
 public:
  GenderLexicon(std::vector<std::string> man_terms,
                std::vector<std::string> woman_terms,
                std::vector<std::string> neutral_terms,
                std::array<std::string, 3> anchor_phrases);

  static GenderLexicon Default();
  // {"man": [...], "woman": [...], "neutral": [...],
  //  "anchors": {"man": "a man", "woman": "a woman", "neutral": "a person"}}
  static GenderLexicon Load(const std::filesystem::path& path);
  static GenderLexicon FromJsonText(std::string_view text);

  // g must not be kMixed.
  const std::vector<std::string>& terms(GenderClass g) const;
  const std::string& canonical_term(GenderClass g) const;
  const std::string& anchor_phrase(GenderClass g) const;

  std::optional<GenderClass> class_of(std::string_view token) const;
  bool contains(std::string_view token) const { return class_of(token).has_value(); }

 private:
  std::array<std::vector<std::string>, 3> terms_;
  std::array<std::string, 3> anchors_;
  std::unordered_map<std::string, GenderClass> index_;
};

enum class CaptionSource { kModel, kHuman };

std::string_view to_string(CaptionSource s);

struct CaptionRecord {
  std::string id;
  std::string image_id;
  std::string text;
  CaptionSource source = CaptionSource::kModel;

  bool mask_present() const { return text.find(kMaskToken) != std::string::npos; }
};

struct ContextObject {
  std::string label;
  double confidence = 0.0;
  std::string classifier;

  bool operator==(const ContextObject&) const = default;
};

struct VisualContext {
  std::string image_id;
  std::vector<ContextObject> objects;

  bool operator==(const VisualContext&) const = default;
};

GenderClass label_caption_gender(std::string_view text, const GenderLexicon& lexicon);

// Replaces the single <MASK> with the canonical term of `g`.
// Throws Error(kDomain) when the mask is absent or g is kMixed.
std::string fill_mask(const CaptionRecord& record, GenderClass g,
                      const GenderLexicon& lexicon);

}  // namespace biasaudit

#endif  // BIASAUDIT_CORE_H_
