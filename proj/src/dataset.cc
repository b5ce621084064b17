#include "biasaudit/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "biasaudit/diagnostics.h"

namespace biasaudit {

namespace {

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

const nlohmann::json& require(const nlohmann::json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::kSchema, std::string(what) + ": missing field '" + key + "'");
  }
  return j.at(key);
}

std::string require_string(const nlohmann::json& j, const char* key, const char* what) {
  const auto& v = require(j, key, what);
  if (!v.is_string()) {
    throw Error(ErrorCode::kSchema, std::string(what) + ": field '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

template <typename Fn>
auto with_line(const std::filesystem::path& path, std::size_t line, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
}

}  // namespace

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse,
                  path.string() + ":" + std::to_string(number) + ": malformed JSON (" + e.what() + ")");
    }
    fn(j, number);
  }
}

CaptionRecord caption_from_json(const nlohmann::json& j) {
  CaptionRecord r;
  r.id = require_string(j, "id", "caption");
  r.image_id = require_string(j, "image_id", "caption");
  r.text = require_string(j, "text", "caption");
  if (r.id.empty()) throw Error(ErrorCode::kSchema, "caption: empty id");
  if (r.text.empty()) throw Error(ErrorCode::kSchema, "caption '" + r.id + "': empty text");
  const auto source = require_string(j, "source", "caption");
  if (source == "model") {
    r.source = CaptionSource::kModel;
  } else if (source == "human") {
    r.source = CaptionSource::kHuman;
  } else {
    throw Error(ErrorCode::kSchema, "caption '" + r.id + "': source must be 'model' or 'human'");
  }
  const auto first = r.text.find(kMaskToken);
  if (first != std::string::npos &&
      r.text.find(kMaskToken, first + kMaskToken.size()) != std::string::npos) {
    throw Error(ErrorCode::kSchema, "caption '" + r.id + "': more than one <MASK>");
  }
  return r;
}

VisualContext context_from_json(const nlohmann::json& j) {
  VisualContext c;
  c.image_id = require_string(j, "image_id", "context");
  const auto& objects = require(j, "objects", "context");
  if (!objects.is_array()) {
    throw Error(ErrorCode::kSchema, "context '" + c.image_id + "': objects must be an array");
  }
  for (const auto& o : objects) {
    ContextObject obj;
    obj.label = require_string(o, "label", "context object");
    const auto& conf = require(o, "confidence", "context object");
    if (!conf.is_number()) {
      throw Error(ErrorCode::kSchema, "context '" + c.image_id + "': confidence must be a number");
    }
    obj.confidence = conf.get<double>();
    if (!std::isfinite(obj.confidence) || obj.confidence < 0.0 || obj.confidence > 1.0) {
      throw Error(ErrorCode::kSchema, "context '" + c.image_id + "': confidence of '" +
                                          obj.label + "' outside [0, 1]");
    }
    obj.classifier = o.contains("classifier") ? require_string(o, "classifier", "context object")
                                              : std::string();
    if (obj.label.empty()) {
      throw Error(ErrorCode::kSchema, "context '" + c.image_id + "': empty object label");
    }
    c.objects.push_back(std::move(obj));
  }
  return c;
}

nlohmann::ordered_json to_json(const VisualContext& c) {
  nlohmann::ordered_json j;
  j["image_id"] = c.image_id;
  j["objects"] = nlohmann::ordered_json::array();
  for (const auto& o : c.objects) {
    nlohmann::ordered_json oj;
    oj["label"] = o.label;
    oj["confidence"] = o.confidence;
    oj["classifier"] = o.classifier;
    j["objects"].push_back(std::move(oj));
  }
  return j;
}

std::vector<CaptionRecord> read_captions(const std::filesystem::path& path) {
  std::vector<CaptionRecord> out;
  std::set<std::string> seen;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    auto record = with_line(path, line, [&] { return caption_from_json(j); });
    if (!seen.insert(record.id).second) {
      throw Error(ErrorCode::kDuplicateKey, path.string() + ":" + std::to_string(line) +
                                                ": duplicate caption id '" + record.id + "'");
    }
    out.push_back(std::move(record));
  });
  std::sort(out.begin(), out.end(),
            [](const CaptionRecord& a, const CaptionRecord& b) { return a.id < b.id; });
  return out;
}

std::vector<VisualContext> read_contexts(const std::filesystem::path& path) {
  std::vector<VisualContext> out;
  std::set<std::string> seen;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    auto context = with_line(path, line, [&] { return context_from_json(j); });
    if (!seen.insert(context.image_id).second) {
      throw Error(ErrorCode::kDuplicateKey, path.string() + ":" + std::to_string(line) +
                                                ": duplicate image id '" + context.image_id + "'");
    }
    out.push_back(std::move(context));
  });
  std::sort(out.begin(), out.end(), [](const VisualContext& a, const VisualContext& b) {
    return a.image_id < b.image_id;
  });
  return out;
}

void write_contexts(const std::filesystem::path& path, const std::vector<VisualContext>& contexts) {
  std::string text;
  for (const auto& c : contexts) {
    text += to_json(c).dump();
    text += '\n';
  }
  write_file_atomic(path, text);
}

ContextIndex::ContextIndex(std::vector<VisualContext> contexts) : contexts_(std::move(contexts)) {
  for (std::size_t i = 0; i < contexts_.size(); ++i) {
    by_image_.emplace(contexts_[i].image_id, i);
  }
}

const VisualContext* ContextIndex::find(std::string_view image_id) const {
  auto it = by_image_.find(image_id);
  return it == by_image_.end() ? nullptr : &contexts_[it->second];
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace biasaudit
