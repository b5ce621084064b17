#include "biasaudit/core.h"

#include <fstream>
#include <sstream>

#include "biasaudit/diagnostics.h"
#include "json.hpp"

namespace biasaudit {

namespace {

std::size_t slot(GenderClass g) {
  if (g == GenderClass::kMixed) {
    throw Error(ErrorCode::kDomain, "gender class 'mixed' has no lexicon entry");
  }
  return static_cast<std::size_t>(g);
}

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c >= 0x80;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace

std::string_view to_string(GenderClass g) {
  switch (g) {
    case GenderClass::kMan: return "man";
    case GenderClass::kWoman: return "woman";
    case GenderClass::kNeutral: return "neutral";
    case GenderClass::kMixed: return "mixed";
  }
  return "unknown";
}

std::optional<GenderClass> parse_gender(std::string_view name) {
  if (name == "man") return GenderClass::kMan;
  if (name == "woman") return GenderClass::kWoman;
  if (name == "neutral" || name == "person") return GenderClass::kNeutral;
  if (name == "mixed") return GenderClass::kMixed;
  return std::nullopt;
}

std::string_view variant_suffix(GenderClass g) {
  switch (g) {
    case GenderClass::kMan: return "man";
    case GenderClass::kWoman: return "woman";
    case GenderClass::kNeutral: return "person";
    case GenderClass::kMixed: break;
  }
  throw Error(ErrorCode::kDomain, "gender class 'mixed' has no variant key");
}

std::string_view to_string(CaptionSource s) {
  return s == CaptionSource::kHuman ? "human" : "model";
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

GenderLexicon::GenderLexicon(std::vector<std::string> man_terms,
                             std::vector<std::string> woman_terms,
                             std::vector<std::string> neutral_terms,
                             std::array<std::string, 3> anchor_phrases)
    : terms_{std::move(man_terms), std::move(woman_terms), std::move(neutral_terms)},
      anchors_(std::move(anchor_phrases)) {
  constexpr std::array<GenderClass, 3> kClasses = {GenderClass::kMan, GenderClass::kWoman,
                                                   GenderClass::kNeutral};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto name = std::string(to_string(kClasses[i]));
    if (terms_[i].empty()) {
      throw Error(ErrorCode::kSchema, "lexicon: '" + name + "' term list is empty");
    }
    if (anchors_[i].empty()) {
      throw Error(ErrorCode::kSchema, "lexicon: '" + name + "' anchor phrase is empty");
    }
    for (auto& term : terms_[i]) {
      term = lowercase(term);
      const auto parts = tokenize(term);
      if (parts.size() != 1 || parts.front() != term) {
        throw Error(ErrorCode::kSchema,
                    "lexicon: term '" + term + "' is not a single lowercase token");
      }
      auto [it, inserted] = index_.emplace(term, kClasses[i]);
      if (!inserted) {
        if (it->second == kClasses[i]) {
          throw Error(ErrorCode::kSchema,
                      "lexicon: term '" + term + "' repeated in '" + name + "'");
        }
        throw Error(ErrorCode::kSchema, "lexicon: term '" + term + "' appears in both '" +
                                            std::string(to_string(it->second)) + "' and '" +
                                            name + "'");
      }
    }
  }
}

GenderLexicon GenderLexicon::Default() {
  return GenderLexicon(
      {"man", "men", "boy", "boys", "guy", "guys", "gentleman", "male"},
      {"woman", "women", "girl", "girls", "lady", "ladies", "female"},
      {"person", "people", "human", "player", "child", "kid"},
      {"a man", "a woman", "a person"});
}

GenderLexicon GenderLexicon::FromJsonText(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("lexicon: ") + e.what());
  }
  auto list = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array()) {
      throw Error(ErrorCode::kSchema, std::string("lexicon: missing array '") + key + "'");
    }
    std::vector<std::string> out;
    for (const auto& v : j[key]) {
      if (!v.is_string()) {
        throw Error(ErrorCode::kSchema, std::string("lexicon: non-string term in '") + key + "'");
      }
      out.push_back(v.get<std::string>());
    }
    return out;
  };
  std::array<std::string, 3> anchors = {"a man", "a woman", "a person"};
  if (j.contains("anchors")) {
    const auto& a = j["anchors"];
    const std::array<const char*, 3> keys = {"man", "woman", "neutral"};
    for (std::size_t i = 0; i < 3; ++i) {
      if (!a.contains(keys[i]) || !a[keys[i]].is_string()) {
        throw Error(ErrorCode::kSchema,
                    std::string("lexicon: anchors.") + keys[i] + " must be a string");
      }
      anchors[i] = a[keys[i]].get<std::string>();
    }
  }
  return GenderLexicon(list("man"), list("woman"), list("neutral"), std::move(anchors));
}

GenderLexicon GenderLexicon::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open lexicon file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return FromJsonText(buf.str());
}

const std::vector<std::string>& GenderLexicon::terms(GenderClass g) const {
  return terms_[slot(g)];
}

const std::string& GenderLexicon::canonical_term(GenderClass g) const {
  return terms_[slot(g)].front();
}

const std::string& GenderLexicon::anchor_phrase(GenderClass g) const {
  return anchors_[slot(g)];
}

std::optional<GenderClass> GenderLexicon::class_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

GenderClass label_caption_gender(std::string_view text, const GenderLexicon& lexicon) {
  bool man = false;
  bool woman = false;
  for (const auto& token : tokenize(text)) {
    const auto g = lexicon.class_of(token);
    if (!g) continue;
    man |= *g == GenderClass::kMan;
    woman |= *g == GenderClass::kWoman;
  }
  if (man && woman) return GenderClass::kMixed;
  if (man) return GenderClass::kMan;
  if (woman) return GenderClass::kWoman;
  return GenderClass::kNeutral;
}

std::string fill_mask(const CaptionRecord& record, GenderClass g, const GenderLexicon& lexicon) {
  const auto pos = record.text.find(kMaskToken);
  if (pos == std::string::npos) {
    throw Error(ErrorCode::kDomain, "caption '" + record.id + "' has no " +
                                        std::string(kMaskToken) + " slot");
  }
  std::string out = record.text;
  out.replace(pos, kMaskToken.size(), lexicon.canonical_term(g));
  return out;
}

}  // namespace biasaudit
