#include "biasaudit/vectors.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "biasaudit/core.h"
#include "biasaudit/dataset.h"
#include "json.hpp"

namespace biasaudit {

namespace {

bool parse_double(std::string_view field, double& out) {
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::kSchema, "embedding dimension must be positive");
}

bool EmbeddingStore::insert(std::string key, Vector v) {
  if (v.size() != dim_) {
    throw Error(ErrorCode::kSchema, "vector for '" + key + "' has " + std::to_string(v.size()) +
                                        " components, expected " + std::to_string(dim_));
  }
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::kSchema, "vector for '" + key + "' has a non-finite component");
    }
  }
  if (entries_.find(key) != entries_.end()) return false;
  entries_.emplace(std::move(key), std::move(v));
  return true;
}

const Vector* EmbeddingStore::find(std::string_view key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

EmbeddingStore load_word_vectors(const std::filesystem::path& path, Diagnostics* diag) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  EmbeddingStore store;
  bool first = true;
  std::string line;
  std::size_t number = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(number) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++number;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) fail("expected a token followed by vector components");
    Vector v(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (!parse_double(fields[i], v[i - 1]) || !std::isfinite(v[i - 1])) {
        fail("component " + std::to_string(i) + " is not a finite number");
      }
    }
    if (first) {
      store = EmbeddingStore(v.size());
      first = false;
    } else if (v.size() != store.dim()) {
      fail("dimension mismatch: " + std::to_string(v.size()) + " components, expected " +
           std::to_string(store.dim()));
    }
    const std::string token(fields[0]);
    if (!store.insert(token, std::move(v)) && diag != nullptr) {
      diag->warn("duplicate_token", path.string() + ":" + std::to_string(number) +
                                        ": duplicate token '" + token + "', keeping first");
    }
  }
  if (first) throw Error(ErrorCode::kParse, path.string() + ": empty word-vector file");
  return store;
}

EmbeddingStore load_sidecar_vectors(const std::filesystem::path& path) {
  EmbeddingStore store;
  bool first = true;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    const auto where = path.string() + ":" + std::to_string(line) + ": ";
    if (j.is_object() && j.contains("_manifest")) return;
    if (!j.is_object() || !j.contains("key") || !j["key"].is_string()) {
      throw Error(ErrorCode::kSchema, where + "record needs a string 'key'");
    }
    const auto key = j["key"].get<std::string>();
    if (!j.contains("vector") || !j["vector"].is_array() || j["vector"].empty()) {
      throw Error(ErrorCode::kSchema, where + "record '" + key + "' needs a non-empty 'vector'");
    }
    Vector v;
    v.reserve(j["vector"].size());
    for (const auto& x : j["vector"]) {
      if (!x.is_number()) {
        throw Error(ErrorCode::kSchema, where + "non-numeric component in '" + key + "'");
      }
      v.push_back(x.get<double>());
    }
    if (first) {
      store = EmbeddingStore(v.size());
      first = false;
    }
    try {
      if (!store.insert(key, std::move(v))) {
        throw Error(ErrorCode::kDuplicateKey, where + "duplicate key '" + key + "'");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDuplicateKey) throw;
      throw Error(e.code(), where + e.what());
    }
  });
  if (first) throw Error(ErrorCode::kParse, path.string() + ": sidecar has no vector records");
  return store;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDomain, "cosine: vectors differ in length");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kDomain, "cosine: zero-norm vector");
  // Symmetric in (a, b): every term above commutes.
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::optional<Vector> embed_phrase(std::string_view phrase, const EmbeddingStore& store) {
  if (const auto* exact = store.find(phrase)) return *exact;
  Vector sum(store.dim(), 0.0);
  std::size_t hits = 0;
  for (const auto& token : tokenize(phrase)) {
    const auto* v = store.find(token);
    if (v == nullptr) continue;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
    ++hits;
  }
  if (hits == 0) return std::nullopt;
  for (double& x : sum) x /= static_cast<double>(hits);
  return sum;
}

}  // namespace biasaudit
