#ifndef BIASAUDIT_DIAGNOSTICS_H_
#define BIASAUDIT_DIAGNOSTICS_H_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace biasaudit {

enum class ErrorCode {
  kIo,            // unreadable / unwritable file
  kParse,         // malformed line or value
  kSchema,        // well-formed but violates the record contract
  kDuplicateKey,  // repeated id or sidecar key
  kMissingKey,    // required sidecar key absent
  kDomain,        // argument outside an operation's domain
};

const char* to_string(ErrorCode code);

// Input-side failures (kIo .. kMissingKey) are validation errors and map to
// exit code 1; kDomain is a runtime error and maps to exit code 2.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

enum class Severity { kWarning, kError };

struct Diagnostic {
  Severity severity;
  std::string code;
  std::string message;
};

// Ordered collector for non-fatal findings. Not synchronized: parallel
// stages keep one collector per work item and merge in canonical order.
class Diagnostics {
 public:
  void warn(std::string code, std::string message);
  void error(std::string code, std::string message);
  void merge(const Diagnostics& other);

  const std::vector<Diagnostic>& entries() const { return entries_; }
  std::size_t warning_count() const;
  std::size_t error_count() const;
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<Diagnostic> entries_;
};

// One JSON object per line: {"severity":..,"code":..,"message":..}.
std::string to_json_line(const Diagnostic& d);

}  // namespace biasaudit

#endif  // BIASAUDIT_DIAGNOSTICS_H_
