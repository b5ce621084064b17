#ifndef BIASAUDIT_DATASET_H_
#define BIASAUDIT_DATASET_H_

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "biasaudit/core.h"
#include "json.hpp"

namespace biasaudit {

// Calls `fn(record, line_number)` for every non-blank line of a JSONL file.
// Malformed JSON raises Error(kParse) naming the file and line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json&, std::size_t)>& fn);

// {"id", "image_id", "text", "source": "model"|"human"}; ids must be unique
// and a text may hold at most one <MASK>. Returned sorted by id.
std::vector<CaptionRecord> read_captions(const std::filesystem::path& path);

// {"image_id", "objects": [{"label", "confidence", "classifier"}]}; image ids
// must be unique. Returned sorted by image id.
std::vector<VisualContext> read_contexts(const std::filesystem::path& path);

void write_contexts(const std::filesystem::path& path, const std::vector<VisualContext>& contexts);

CaptionRecord caption_from_json(const nlohmann::json& j);
VisualContext context_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const VisualContext& c);

// image_id -> context; lookups return nullptr for images without context.
class ContextIndex {
 public:
  ContextIndex() = default;
  explicit ContextIndex(std::vector<VisualContext> contexts);

  const VisualContext* find(std::string_view image_id) const;
  const std::vector<VisualContext>& all() const { return contexts_; }

 private:
  std::vector<VisualContext> contexts_;
  std::map<std::string, std::size_t, std::less<>> by_image_;
};

// Writes `text` to `path` through a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace biasaudit

#endif  // BIASAUDIT_DATASET_H_
