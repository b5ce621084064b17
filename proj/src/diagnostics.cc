#include "biasaudit/diagnostics.h"

#include <algorithm>

#include "json.hpp"

namespace biasaudit {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kDuplicateKey: return "duplicate_key";
    case ErrorCode::kMissingKey: return "missing_key";
    case ErrorCode::kDomain: return "domain";
  }
  return "unknown";
}

int exit_code_for(ErrorCode code) { return code == ErrorCode::kDomain ? 2 : 1; }

void Diagnostics::warn(std::string code, std::string message) {
  entries_.push_back({Severity::kWarning, std::move(code), std::move(message)});
}

void Diagnostics::error(std::string code, std::string message) {
  entries_.push_back({Severity::kError, std::move(code), std::move(message)});
}

void Diagnostics::merge(const Diagnostics& other) {
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

std::size_t Diagnostics::warning_count() const {
  return std::count_if(entries_.begin(), entries_.end(), [](const Diagnostic& d) {
    return d.severity == Severity::kWarning;
  });
}

std::size_t Diagnostics::error_count() const {
  return entries_.size() - warning_count();
}

std::string to_json_line(const Diagnostic& d) {
  nlohmann::ordered_json j;
  j["severity"] = d.severity == Severity::kError ? "error" : "warning";
  j["code"] = d.code;
  j["message"] = d.message;
  return j.dump();
}

}  // namespace biasaudit
