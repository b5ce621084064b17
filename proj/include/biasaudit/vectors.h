#ifndef BIASAUDIT_VECTORS_H_
#define BIASAUDIT_VECTORS_H_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "biasaudit/diagnostics.h"

namespace biasaudit {

using Vector = std::vector<double>;

// key -> fixed-dimension vector of finite doubles. Immutable once loaded.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Returns false (and leaves the store unchanged) when the key exists.
  // Throws Error(kSchema) on a dimension mismatch or non-finite component.
  bool insert(std::string key, Vector v);

  const Vector* find(std::string_view key) const;
  bool contains(std::string_view key) const { return find(key) != nullptr; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Vector, Hash, std::equal_to<>> entries_;
};

// GloVe-style text: `token v1 ... vd` per line. The first line fixes d.
// Duplicate tokens keep the first vector and add a warning to `diag`.
EmbeddingStore load_word_vectors(const std::filesystem::path& path, Diagnostics* diag = nullptr);

// JSONL {"key": str, "vector": [..]}. An optional {"_manifest": {...}} header
// record is skipped. Duplicate keys are errors.
EmbeddingStore load_sidecar_vectors(const std::filesystem::path& path);

// dot(a,b) / (|a| |b|) in double, clamped to [-1, 1]. Throws Error(kDomain)
// for unequal lengths or a zero-norm input.
double cosine(std::span<const double> a, std::span<const double> b);

// Vector for a possibly multi-word phrase: the exact key if present, else the
// component-wise mean of the in-vocabulary lowercase tokens. nullopt when no
// token is in the store.
std::optional<Vector> embed_phrase(std::string_view phrase, const EmbeddingStore& store);

}  // namespace biasaudit

#endif  // BIASAUDIT_VECTORS_H_
